//! Line-oriented ASCII mesh files.
//!
//! ```text
//! # comment
//! v x y z
//! t i j k      (0-based vertex indices)
//! fixed n      (0-based DOF index)
//! gap n
//! ```

use std::fmt::Write as _;

use super::mesh::Mesh;
use super::OperatorError;

#[derive(Clone, Debug)]
pub struct MeshFile {
    pub mesh: Mesh,
    pub fixed: Vec<usize>,
    pub gap: Vec<usize>,
}

pub fn write_mesh(mesh: &Mesh, fixed: &[usize], gap: &[usize]) -> String {
    let mut s = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {:e} {:e} {:e}", v[0], v[1], v[2]);
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "t {} {} {}", t[0], t[1], t[2]);
    }
    for f in fixed {
        let _ = writeln!(s, "fixed {f}");
    }
    for g in gap {
        let _ = writeln!(s, "gap {g}");
    }
    s
}

pub fn read_mesh(text: &str) -> Result<MeshFile, OperatorError> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut fixed = Vec::new();
    let mut gap = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |what: &str| OperatorError::InvalidMesh(format!("line {}: {what}: `{line}`", no + 1));
        let mut it = line.split_whitespace();
        let key = it.next().unwrap_or_default();
        let rest: Vec<&str> = it.collect();
        match key {
            "v" => {
                let xs: Result<Vec<f64>, _> = rest.iter().map(|s| s.parse::<f64>()).collect();
                match xs {
                    Ok(x) if x.len() == 3 && x.iter().all(|c| c.is_finite()) => vertices.push([x[0], x[1], x[2]]),
                    _ => return Err(bad("expected three finite coordinates")),
                }
            }
            "t" => {
                let xs: Result<Vec<usize>, _> = rest.iter().map(|s| s.parse::<usize>()).collect();
                match xs {
                    Ok(x) if x.len() == 3 => triangles.push([x[0], x[1], x[2]]),
                    _ => return Err(bad("expected three vertex indices")),
                }
            }
            "fixed" | "gap" => {
                let n = match rest.as_slice() {
                    [s] => s.parse::<usize>().map_err(|_| bad("expected a DOF index"))?,
                    _ => return Err(bad("expected a DOF index")),
                };
                if key == "fixed" { fixed.push(n) } else { gap.push(n) }
            }
            _ => return Err(bad("unknown record")),
        }
    }
    let mesh = Mesh::from_parts(vertices, triangles)?;
    let n = mesh.dof_count();
    for &d in fixed.iter().chain(&gap) {
        if d >= n {
            return Err(OperatorError::DofOutOfRange { dof: d, n_dof: n });
        }
    }
    Ok(MeshFile { mesh, fixed, gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::mesh::{build_mesh, PlateSpec};

    #[test]
    fn round_trip() {
        let m = build_mesh(&PlateSpec { length_x: 2.0, length_y: 1.0, nx: 3, ny: 2, ka: 0.5 }).unwrap();
        let text = write_mesh(&m, &[4], &[4]);
        let back = read_mesh(&text).unwrap();
        assert_eq!(back.mesh.vertices, m.vertices);
        assert_eq!(back.mesh.triangles, m.triangles);
        assert_eq!(back.mesh.interior_edges, m.interior_edges);
        assert_eq!(back.fixed, vec![4]);
        assert_eq!(back.gap, vec![4]);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_mesh("v 0 0\n").is_err());
        assert!(read_mesh("q 1 2 3\n").is_err());
        assert!(read_mesh("v 0 0 0\nv 1 0 0\nv 0 1 0\nt 0 1 2\nfixed 0\n").is_err());
    }
}
