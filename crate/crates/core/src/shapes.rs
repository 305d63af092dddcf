//! Binary genes over the optimizable DOFs and the DOF-set algebra around them.
//!
//! A gene of length `N_opt = N_dof - P` describes which non-fixed edges carry
//! metal. Fixed DOFs (typically the feed) are always active and sit outside
//! the bit string, so no genetic operator can touch them.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ShapeError {
    #[error("DOF {dof} out of range (N_dof = {n_dof})")]
    DofOutOfRange { dof: usize, n_dof: usize },
    #[error("fixed DOF {0} listed twice")]
    DuplicateFixed(usize),
    #[error("gene length {got} does not match N_opt = {expected}")]
    Length { got: usize, expected: usize },
    #[error("genes have different parameterizations")]
    Mismatch,
    #[error("malformed gene text: {0}")]
    Parse(String),
}

/// Binary word over the DOFs outside the fixed set.
#[derive(Clone)]
pub struct Gene {
    n_dof: usize,
    fixed: Arc<Vec<usize>>,
    free: Arc<Vec<usize>>,
    words: Vec<u64>,
}

impl PartialEq for Gene {
    fn eq(&self, other: &Self) -> bool {
        self.n_dof == other.n_dof && self.fixed == other.fixed && self.words == other.words
    }
}

impl Eq for Gene {}

impl std::hash::Hash for Gene {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.n_dof.hash(state);
        self.fixed.hash(state);
        self.words.hash(state);
    }
}

impl fmt::Debug for Gene {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Gene({}, fixed={:?}, {})", self.n_dof, self.fixed, self.hex())
    }
}

impl Gene {
    /// All-zeros gene: only the fixed DOFs are active.
    pub fn zeros(n_dof: usize, fixed: &[usize]) -> Result<Self, ShapeError> {
        let mut f = fixed.to_vec();
        f.sort_unstable();
        for w in f.windows(2) {
            if w[0] == w[1] {
                return Err(ShapeError::DuplicateFixed(w[0]));
            }
        }
        if let Some(&d) = f.iter().find(|&&d| d >= n_dof) {
            return Err(ShapeError::DofOutOfRange { dof: d, n_dof });
        }
        let free: Vec<usize> = (0..n_dof).filter(|d| f.binary_search(d).is_err()).collect();
        let words = vec![0; free.len().div_ceil(64)];
        Ok(Self { n_dof, fixed: Arc::new(f), free: Arc::new(free), words })
    }

    pub fn ones(n_dof: usize, fixed: &[usize]) -> Result<Self, ShapeError> {
        let mut g = Self::zeros(n_dof, fixed)?;
        for i in 0..g.n_opt() {
            g.set(i, true);
        }
        Ok(g)
    }

    /// Same parameterization as `self`, bits taken from `bits`.
    pub fn with_bits(&self, bits: &[bool]) -> Result<Self, ShapeError> {
        if bits.len() != self.n_opt() {
            return Err(ShapeError::Length { got: bits.len(), expected: self.n_opt() });
        }
        let mut g = self.cleared();
        for (i, b) in bits.iter().enumerate() {
            g.set(i, *b);
        }
        Ok(g)
    }

    /// Gene whose active set is `active ∪ F`.
    pub fn from_active(n_dof: usize, fixed: &[usize], active: &[usize]) -> Result<Self, ShapeError> {
        let mut g = Self::zeros(n_dof, fixed)?;
        for &d in active {
            if d >= n_dof {
                return Err(ShapeError::DofOutOfRange { dof: d, n_dof });
            }
            if let Some(i) = g.bit_of(d) {
                g.set(i, true);
            }
        }
        Ok(g)
    }

    /// Zero gene sharing this parameterization.
    pub fn cleared(&self) -> Self {
        Self { words: vec![0; self.words.len()], ..self.clone() }
    }

    pub fn n_dof(&self) -> usize {
        self.n_dof
    }

    pub fn n_opt(&self) -> usize {
        self.free.len()
    }

    pub fn fixed(&self) -> &[usize] {
        &self.fixed
    }

    /// DOF index of each bit position.
    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.n_opt(), "bit {i} out of range");
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, v: bool) {
        assert!(i < self.n_opt(), "bit {i} out of range");
        if v {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < self.n_opt(), "bit {i} out of range");
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn flipped(&self, i: usize) -> Self {
        let mut g = self.clone();
        g.flip(i);
        g
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..self.n_opt()).map(|i| self.get(i)).collect()
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Bit position of a DOF, `None` for fixed DOFs.
    pub fn bit_of(&self, dof: usize) -> Option<usize> {
        self.free.binary_search(&dof).ok()
    }

    pub fn is_active(&self, dof: usize) -> bool {
        match self.bit_of(dof) {
            Some(i) => self.get(i),
            None => dof < self.n_dof,
        }
    }

    /// Active DOFs `G = F ∪ {set bits}`, ascending.
    pub fn active_dofs(&self) -> Vec<usize> {
        (0..self.n_dof).filter(|&d| self.is_active(d)).collect()
    }

    pub fn same_parameterization(&self, other: &Self) -> bool {
        self.n_dof == other.n_dof && self.fixed == other.fixed
    }

    /// Hex digits, nibble `q` holding bits `4q..4q+3` (bit `4q` least significant).
    pub fn hex(&self) -> String {
        let n = self.n_opt();
        (0..n.div_ceil(4))
            .map(|q| {
                let mut v = 0u32;
                for b in 0..4 {
                    let i = 4 * q + b;
                    if i < n && self.get(i) {
                        v |= 1 << b;
                    }
                }
                char::from_digit(v, 16).unwrap()
            })
            .collect()
    }

    /// Two-line text form: `gene n_dof=<N> fixed=<i,j,...>` then the hex digits.
    pub fn to_text(&self) -> String {
        let fixed: Vec<String> = self.fixed.iter().map(|d| d.to_string()).collect();
        format!("gene n_dof={} fixed={}\n{}\n", self.n_dof, fixed.join(","), self.hex())
    }

    pub fn parse(text: &str) -> Result<Self, ShapeError> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| ShapeError::Parse("empty input".into()))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("gene") {
            return Err(ShapeError::Parse(format!("header must start with `gene`: `{header}`")));
        }
        let mut n_dof = None;
        let mut fixed = None;
        for p in parts {
            if let Some(v) = p.strip_prefix("n_dof=") {
                n_dof = Some(v.parse::<usize>().map_err(|_| ShapeError::Parse(format!("bad n_dof `{v}`")))?);
            } else if let Some(v) = p.strip_prefix("fixed=") {
                let list: Result<Vec<usize>, _> = v.split(',').filter(|s| !s.is_empty()).map(str::parse).collect();
                fixed = Some(list.map_err(|_| ShapeError::Parse(format!("bad fixed list `{v}`")))?);
            } else {
                return Err(ShapeError::Parse(format!("unknown header field `{p}`")));
            }
        }
        let n_dof = n_dof.ok_or_else(|| ShapeError::Parse("missing n_dof".into()))?;
        let mut g = Self::zeros(n_dof, &fixed.unwrap_or_default())?;
        let hex = lines.next().unwrap_or("");
        if lines.next().is_some() {
            return Err(ShapeError::Parse("trailing content after hex line".into()));
        }
        let n = g.n_opt();
        if hex.len() != n.div_ceil(4) {
            return Err(ShapeError::Parse(format!("expected {} hex digits, got {}", n.div_ceil(4), hex.len())));
        }
        for (q, c) in hex.chars().enumerate() {
            let v = c.to_digit(16).ok_or_else(|| ShapeError::Parse(format!("bad hex digit `{c}`")))?;
            for b in 0..4 {
                let i = 4 * q + b;
                if v >> b & 1 == 1 {
                    if i >= n {
                        return Err(ShapeError::Parse("padding bits must be zero".into()));
                    }
                    g.set(i, true);
                }
            }
        }
        Ok(g)
    }
}

/// Sets of Table-I type for one shape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DofSets {
    pub all: Vec<usize>,
    pub fixed: Vec<usize>,
    pub eval_domain: Vec<usize>,
    pub active: Vec<usize>,
    pub removable: Vec<usize>,
    pub addable: Vec<usize>,
}

/// Derives `G`, `R = G \ F` and `A = G0 \ G`; `d_eval = None` means `D = G0`.
pub fn derive_sets(gene: &Gene, d_eval: Option<&[usize]>) -> Result<DofSets, ShapeError> {
    let n = gene.n_dof();
    let eval_domain = match d_eval {
        Some(d) => {
            if let Some(&bad) = d.iter().find(|&&x| x >= n) {
                return Err(ShapeError::DofOutOfRange { dof: bad, n_dof: n });
            }
            let mut v = d.to_vec();
            v.sort_unstable();
            v.dedup();
            v
        }
        None => (0..n).collect(),
    };
    let active = gene.active_dofs();
    let removable = active.iter().copied().filter(|d| gene.bit_of(*d).is_some()).collect();
    let addable = (0..n).filter(|d| !gene.is_active(*d)).collect();
    Ok(DofSets { all: (0..n).collect(), fixed: gene.fixed().to_vec(), eval_domain, active, removable, addable })
}

pub fn hamming(a: &Gene, b: &Gene) -> Result<usize, ShapeError> {
    if !a.same_parameterization(b) {
        return Err(ShapeError::Mismatch);
    }
    Ok(a.words.iter().zip(&b.words).map(|(x, y)| (x ^ y).count_ones() as usize).sum())
}

/// Number of distinct binary shapes, `2^N_opt`.
pub fn solution_space_size(gene: &Gene) -> BigUint {
    BigUint::from(1u32) << gene.n_opt()
}
