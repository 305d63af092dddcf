//! Triangular meshes and RWG degrees of freedom.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::OperatorError;

pub type Vec3 = [f64; 3];

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Rectangular plate in the z = 0 plane, centred at the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateSpec {
    pub length_x: f64,
    pub length_y: f64,
    pub nx: usize,
    pub ny: usize,
    /// Electrical size k·a, with a the radius of the sphere circumscribing the plate.
    pub ka: f64,
}

impl PlateSpec {
    pub fn validate(&self) -> Result<(), OperatorError> {
        if !(self.length_x > 0.0 && self.length_y > 0.0)
            || !self.length_x.is_finite()
            || !self.length_y.is_finite()
        {
            return Err(OperatorError::InvalidPlate(format!(
                "plate lengths must be positive, got {} x {}",
                self.length_x, self.length_y
            )));
        }
        if self.nx == 0 || self.ny == 0 {
            return Err(OperatorError::InvalidPlate(format!(
                "subdivisions must be at least 1, got nx={} ny={}",
                self.nx, self.ny
            )));
        }
        if !(self.ka > 0.0 && self.ka.is_finite()) {
            return Err(OperatorError::InvalidPlate(format!("ka must be positive, got {}", self.ka)));
        }
        Ok(())
    }

    pub fn circumradius(&self) -> f64 {
        0.5 * self.length_x.hypot(self.length_y)
    }

    pub fn wavenumber(&self) -> f64 {
        self.ka / self.circumradius()
    }

    /// Number of interior edges of the structured mesh.
    pub fn dof_count(&self) -> usize {
        3 * self.nx * self.ny - self.nx - self.ny
    }
}

/// An RWG degree of freedom: an interior edge shared by two triangles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InteriorEdge {
    /// Triangle in which the current flows away from its free vertex.
    pub plus: usize,
    pub minus: usize,
    /// Edge end points, ascending.
    pub vertices: [usize; 2],
    /// Vertex of `plus` (resp. `minus`) opposite the edge.
    pub plus_free: usize,
    pub minus_free: usize,
}

/// Per-triangle view of the basis: local slot `i` is the edge opposite vertex `i`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct LocalBasis {
    pub dof: Option<usize>,
    pub sign: f64,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub interior_edges: Vec<InteriorEdge>,
    pub edge_lengths: Vec<f64>,
    pub areas: Vec<f64>,
    pub local: Vec<[LocalBasis; 3]>,
}

impl Mesh {
    /// Builds the RWG basis of an arbitrary orientable triangle surface.
    pub fn from_parts(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self, OperatorError> {
        let mut areas = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(OperatorError::InvalidMesh(format!("triangle {t} references a missing vertex")));
            }
            let a = 0.5 * norm(cross(sub(vertices[tri[1]], vertices[tri[0]]), sub(vertices[tri[2]], vertices[tri[0]])));
            if !(a > 0.0) {
                return Err(OperatorError::InvalidMesh(format!("triangle {t} has zero area")));
            }
            areas.push(a);
        }

        // Directed edges keyed by the unordered vertex pair.
        let mut owners: BTreeMap<(usize, usize), Vec<(usize, usize, bool)>> = BTreeMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for i in 0..3 {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                let key = (a.min(b), a.max(b));
                owners.entry(key).or_default().push((t, i, a < b));
            }
        }

        let mut interior_edges = Vec::new();
        let mut edge_lengths = Vec::new();
        let mut local = vec![[LocalBasis::default(); 3]; triangles.len()];
        for (&(lo, hi), own) in &owners {
            match own.len() {
                1 => {}
                2 => {
                    let (t0, i0, fwd0) = own[0];
                    let (t1, i1, fwd1) = own[1];
                    if fwd0 == fwd1 {
                        return Err(OperatorError::InvalidMesh(format!(
                            "triangles {t0} and {t1} have inconsistent orientation"
                        )));
                    }
                    let ((tp, ip), (tm, im)) = if fwd0 { ((t0, i0), (t1, i1)) } else { ((t1, i1), (t0, i0)) };
                    let dof = interior_edges.len();
                    interior_edges.push(InteriorEdge {
                        plus: tp,
                        minus: tm,
                        vertices: [lo, hi],
                        plus_free: triangles[tp][ip],
                        minus_free: triangles[tm][im],
                    });
                    edge_lengths.push(norm(sub(vertices[hi], vertices[lo])));
                    local[tp][ip] = LocalBasis { dof: Some(dof), sign: 1.0 };
                    local[tm][im] = LocalBasis { dof: Some(dof), sign: -1.0 };
                }
                n => {
                    return Err(OperatorError::InvalidMesh(format!(
                        "edge ({lo}, {hi}) is shared by {n} triangles"
                    )))
                }
            }
        }

        Ok(Self { vertices, triangles, interior_edges, edge_lengths, areas, local })
    }

    pub fn dof_count(&self) -> usize {
        self.interior_edges.len()
    }

    pub fn triangle_vertices(&self, t: usize) -> [Vec3; 3] {
        let tri = self.triangles[t];
        [self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]]]
    }

    pub fn centroid(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.triangle_vertices(t);
        scale(add(add(a, b), c), 1.0 / 3.0)
    }

    /// Unit normal following the vertex order.
    pub fn normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.triangle_vertices(t);
        let n = cross(sub(b, a), sub(c, a));
        scale(n, 1.0 / norm(n))
    }

    pub fn edge_midpoint(&self, dof: usize) -> Vec3 {
        let [a, b] = self.interior_edges[dof].vertices;
        scale(add(self.vertices[a], self.vertices[b]), 0.5)
    }

    /// DOF whose edge midpoint lies closest to `p` (lowest index on ties).
    pub fn nearest_dof(&self, p: Vec3) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for n in 0..self.dof_count() {
            let d = norm(sub(self.edge_midpoint(n), p));
            if best.is_none_or(|(_, bd)| d < bd - 1e-12 * bd.max(1e-300)) {
                best = Some((n, d));
            }
        }
        best.map(|(n, _)| n)
    }

    /// DOFs whose edges lie on the line x = `x0` (within `tol`).
    pub fn dofs_on_vertical_line(&self, x0: f64, tol: f64) -> Vec<usize> {
        (0..self.dof_count())
            .filter(|&n| {
                let [a, b] = self.interior_edges[n].vertices;
                (self.vertices[a][0] - x0).abs() <= tol && (self.vertices[b][0] - x0).abs() <= tol
            })
            .collect()
    }

    /// Value of basis `dof` at a point of triangle `t` given in barycentric coordinates.
    pub fn basis_value(&self, t: usize, slot: usize, bary: [f64; 3]) -> Vec3 {
        let lb = self.local[t][slot];
        let v = self.triangle_vertices(t);
        let r = point(&v, bary);
        scale(sub(r, v[slot]), lb.sign / (2.0 * self.areas[t]))
    }
}

#[inline]
pub fn point(v: &[Vec3; 3], bary: [f64; 3]) -> Vec3 {
    [
        bary[0] * v[0][0] + bary[1] * v[1][0] + bary[2] * v[2][0],
        bary[0] * v[0][1] + bary[1] * v[1][1] + bary[2] * v[2][1],
        bary[0] * v[0][2] + bary[1] * v[1][2] + bary[2] * v[2][2],
    ]
}

/// Structured mesh of `2·nx·ny` right triangles.
///
/// Cell (i, j) is split along the diagonal from its lower-left to its
/// upper-right corner; vertex (i, j) has index `j·(nx+1) + i`.
pub fn build_mesh(spec: &PlateSpec) -> Result<Mesh, OperatorError> {
    spec.validate()?;
    let (nx, ny) = (spec.nx, spec.ny);
    let dx = spec.length_x / nx as f64;
    let dy = spec.length_y / ny as f64;
    let x0 = -0.5 * spec.length_x;
    let y0 = -0.5 * spec.length_y;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([x0 + i as f64 * dx, y0 + j as f64 * dy, 0.0]);
        }
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let v00 = vid(i, j);
            let v10 = vid(i + 1, j);
            let v11 = vid(i + 1, j + 1);
            let v01 = vid(i, j + 1);
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    Mesh::from_parts(vertices, triangles)
}
