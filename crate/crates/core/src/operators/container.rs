//! Binary operator container (`MOMX`).
//!
//! Little-endian layout: magic `MOMX`, version `u32`, `N_dof` `u32`, flags
//! `u32`, then one record per matrix: tag `u16`, rows `u32`, cols `u32`,
//! column-major data (`f64` for real matrices, `(re, im)` pairs for complex).

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::OperatorSet;
use crate::C64;

pub const MAGIC: &[u8; 4] = b"MOMX";
pub const VERSION: u32 = 1;

const TAG_Z0: u16 = 1;
const TAG_ZRHO: u16 = 2;
const TAG_ZL: u16 = 3;
const TAG_V: u16 = 4;
const TAG_W: u16 = 5;
const TAG_XM: u16 = 6;
const TAG_XE: u16 = 7;
const TAG_U1: u16 = 8;
const TAG_LCHOL: u16 = 9;
const TAG_FROWS: u16 = 10;
const TAG_FDIRS: u16 = 11;
const TAG_K: u16 = 12;
const TAG_GAP: u16 = 13;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("bad magic bytes (not a MOMX container)")]
    BadMagic,
    #[error("unsupported container version {found} (expected {VERSION})")]
    VersionMismatch { found: u32 },
    #[error("container truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error("unknown matrix tag {0}")]
    UnknownTag(u16),
    #[error("matrix with tag {tag} has shape {rows}x{cols}, expected {expected}")]
    Shape { tag: u16, rows: usize, cols: usize, expected: String },
    #[error("required matrix with tag {0} missing")]
    Missing(u16),
    #[error("duplicate matrix tag {0}")]
    Duplicate(u16),
    #[error(transparent)]
    Io(#[from] io::Error),
}

struct Writer(Vec<u8>);

impl Writer {
    fn u16(&mut self, x: u16) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn u32(&mut self, x: u32) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn f64(&mut self, x: f64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn real(&mut self, tag: u16, m: &DMatrix<f64>) {
        self.u16(tag);
        self.u32(m.nrows() as u32);
        self.u32(m.ncols() as u32);
        for x in m.iter() {
            self.f64(*x);
        }
    }
    fn complex(&mut self, tag: u16, m: &DMatrix<C64>) {
        self.u16(tag);
        self.u32(m.nrows() as u32);
        self.u32(m.ncols() as u32);
        for x in m.iter() {
            self.f64(x.re);
            self.f64(x.im);
        }
    }
}

/// Serializes an operator set to bytes.
pub fn encode(set: &OperatorSet) -> Vec<u8> {
    let n = set.n_dof();
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.u32(n as u32);
    w.u32(0);
    w.real(TAG_K, &DMatrix::from_element(1, 1, set.k));
    w.complex(TAG_Z0, &set.z0);
    w.real(TAG_ZRHO, &set.zrho);
    w.complex(TAG_ZL, &DMatrix::from_column_slice(n, 1, set.zl.as_slice()));
    w.complex(TAG_V, &DMatrix::from_column_slice(n, 1, set.v.as_slice()));
    w.real(TAG_W, &set.w);
    w.real(TAG_XM, &set.xm);
    w.real(TAG_XE, &set.xe);
    w.real(TAG_U1, &set.u1);
    w.real(TAG_LCHOL, &set.l_chol);
    w.complex(TAG_FROWS, &set.f_rows);
    let dirs = DMatrix::from_fn(set.f_dirs.len(), 6, |i, j| if j < 3 { set.f_dirs[i].0[j] } else { set.f_dirs[i].1[j - 3] });
    w.real(TAG_FDIRS, &dirs);
    let gap = DMatrix::from_fn(set.gap_dofs.len(), 1, |i, _| set.gap_dofs[i] as f64);
    w.real(TAG_GAP, &gap);
    w.0
}

/// Writes atomically: the data goes to a sibling temporary file that is
/// renamed into place only after a successful flush.
pub fn save_operators(set: &OperatorSet, path: &Path) -> Result<(), ContainerError> {
    write_atomic(path, &encode(set))?;
    Ok(())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !dir.is_dir() {
        return Err(io::Error::new(io::ErrorKind::NotFound, format!("directory {} does not exist", dir.display())));
    }
    let name = path.file_name().ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    res
}

struct Reader<'a> {
    b: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], ContainerError> {
        if self.b.len() - self.pos < n {
            return Err(ContainerError::Truncated { offset: self.b.len() });
        }
        let s = &self.b[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u16(&mut self) -> Result<u16, ContainerError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32, ContainerError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64s(&mut self, count: usize) -> Result<Vec<f64>, ContainerError> {
        let bytes = count.checked_mul(8).ok_or(ContainerError::Truncated { offset: self.b.len() })?;
        let raw = self.take(bytes)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

enum Payload {
    Real(DMatrix<f64>),
    Complex(DMatrix<C64>),
}

fn is_complex(tag: u16) -> Option<bool> {
    match tag {
        TAG_Z0 | TAG_ZL | TAG_V | TAG_FROWS => Some(true),
        TAG_ZRHO | TAG_W | TAG_XM | TAG_XE | TAG_U1 | TAG_LCHOL | TAG_FDIRS | TAG_K | TAG_GAP => Some(false),
        _ => None,
    }
}

/// Parses a container; nothing is returned unless the whole file is valid.
pub fn decode(bytes: &[u8]) -> Result<OperatorSet, ContainerError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(ContainerError::BadMagic);
    }
    let mut r = Reader { b: bytes, pos: 4 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(ContainerError::VersionMismatch { found: version });
    }
    let n = r.u32()? as usize;
    let _flags = r.u32()?;
    let mut slots: [Option<Payload>; 14] = Default::default();
    while r.pos < bytes.len() {
        let tag = r.u16()?;
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let complex = is_complex(tag).ok_or(ContainerError::UnknownTag(tag))?;
        let count = rows.checked_mul(cols).ok_or(ContainerError::Truncated { offset: bytes.len() })?;
        let payload = if complex {
            let raw = r.f64s(count.checked_mul(2).ok_or(ContainerError::Truncated { offset: bytes.len() })?)?;
            let data: Vec<C64> = raw.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect();
            Payload::Complex(DMatrix::from_vec(rows, cols, data))
        } else {
            Payload::Real(DMatrix::from_vec(rows, cols, r.f64s(count)?))
        };
        let slot = &mut slots[tag as usize];
        if slot.is_some() {
            return Err(ContainerError::Duplicate(tag));
        }
        *slot = Some(payload);
    }

    let mut real = |tag: u16, shape: Option<(usize, usize)>| -> Result<DMatrix<f64>, ContainerError> {
        match slots[tag as usize].take() {
            Some(Payload::Real(m)) => check_shape(tag, m, shape),
            _ => Err(ContainerError::Missing(tag)),
        }
    };
    let k = real(TAG_K, Some((1, 1)))?[(0, 0)];
    let zrho = real(TAG_ZRHO, Some((n, n)))?;
    let w = real(TAG_W, Some((n, n)))?;
    let xm = real(TAG_XM, Some((n, n)))?;
    let xe = real(TAG_XE, Some((n, n)))?;
    let u1 = real(TAG_U1, None)?;
    let l_chol = real(TAG_LCHOL, Some((n, n)))?;
    let dirs = real(TAG_FDIRS, None)?;
    let gap = real(TAG_GAP, None)?;
    let mut complex = |tag: u16, shape: (usize, usize)| -> Result<DMatrix<C64>, ContainerError> {
        match slots[tag as usize].take() {
            Some(Payload::Complex(m)) => check_shape(tag, m, Some(shape)),
            _ => Err(ContainerError::Missing(tag)),
        }
    };
    let z0 = complex(TAG_Z0, (n, n))?;
    let zl = complex(TAG_ZL, (n, 1))?;
    let v = complex(TAG_V, (n, 1))?;
    let n_dirs = dirs.nrows();
    let f_rows = complex(TAG_FROWS, (n_dirs, n))?;
    if u1.ncols() != n {
        return Err(ContainerError::Shape { tag: TAG_U1, rows: u1.nrows(), cols: u1.ncols(), expected: format!("Lx{n}") });
    }
    if dirs.ncols() != 6 {
        return Err(ContainerError::Shape { tag: TAG_FDIRS, rows: dirs.nrows(), cols: dirs.ncols(), expected: "Dx6".into() });
    }
    if gap.ncols() != 1 && gap.nrows() != 0 {
        return Err(ContainerError::Shape { tag: TAG_GAP, rows: gap.nrows(), cols: gap.ncols(), expected: "Gx1".into() });
    }
    let f_dirs = (0..n_dirs)
        .map(|i| ([dirs[(i, 0)], dirs[(i, 1)], dirs[(i, 2)]], [dirs[(i, 3)], dirs[(i, 4)], dirs[(i, 5)]]))
        .collect();
    let gap_dofs = gap.iter().map(|x| *x as usize).collect();
    Ok(OperatorSet {
        k,
        z0,
        zrho,
        zl: DVector::from_column_slice(zl.as_slice()),
        v: DVector::from_column_slice(v.as_slice()),
        w,
        xm,
        xe,
        u1,
        l_chol,
        f_rows,
        f_dirs,
        gap_dofs,
    })
}

fn check_shape<T>(tag: u16, m: DMatrix<T>, shape: Option<(usize, usize)>) -> Result<DMatrix<T>, ContainerError> {
    match shape {
        Some((r, c)) if m.shape() != (r, c) => Err(ContainerError::Shape {
            tag,
            rows: m.nrows(),
            cols: m.ncols(),
            expected: format!("{r}x{c}"),
        }),
        _ => Ok(m),
    }
}

pub fn load_operators(path: &Path) -> Result<OperatorSet, ContainerError> {
    decode(&fs::read(path)?)
}
