//! Far-field projections.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::efie::triangle_geometry;
use super::excitation::check_pair;
use super::mesh::{dot, sub, Mesh, Vec3};
use super::quadrature::TriangleRule;
use super::OperatorError;
use crate::{C64, ETA0};

/// Row `F_n = -(jηk/4π) ∫ ê·f_n exp(jk d̂·r) dS`, so that the radiation
/// intensity in direction `d̂` and polarization `ê` is `|F·I|² / (2η)`.
pub fn farfield_row(mesh: &Mesh, k: f64, d: Vec3, e: Vec3, rule: &TriangleRule) -> Result<DVector<C64>, OperatorError> {
    check_pair(d, e)?;
    let n = mesh.dof_count();
    let mut f = DVector::from_element(n, C64::new(0.0, 0.0));
    let pref = C64::new(0.0, -ETA0 * k / (4.0 * PI));
    for g in triangle_geometry(mesh, rule) {
        for (r, w) in g.pts.iter().zip(&g.w) {
            let phase = C64::from_polar(1.0, k * dot(d, *r));
            for slot in 0..3 {
                let Some(dof) = g.dofs[slot] else { continue };
                let proj = dot(sub(*r, g.v[slot]), e) * g.signs[slot] / (2.0 * g.area);
                f[dof] += pref * phase * (w * proj);
            }
        }
    }
    Ok(f)
}

/// Stacks several far-field rows into a matrix, one row per direction pair.
pub fn farfield_rows(mesh: &Mesh, k: f64, dirs: &[(Vec3, Vec3)], rule: &TriangleRule) -> Result<DMatrix<C64>, OperatorError> {
    let mut out = DMatrix::from_element(dirs.len(), mesh.dof_count(), C64::new(0.0, 0.0));
    for (i, (d, e)) in dirs.iter().enumerate() {
        let row = farfield_row(mesh, k, *d, *e, rule)?;
        out.set_row(i, &row.transpose());
    }
    Ok(out)
}

/// Radiation-intensity matrix `U(d̂, ê)` built from its double integral,
/// `U_mn = (η k² / 32π²) ∫∫ (ê·f_m)(ê·f_n) exp(jk d̂·(r' - r)) dS dS'`.
pub fn radiation_intensity_matrix(mesh: &Mesh, k: f64, d: Vec3, e: Vec3, rule: &TriangleRule) -> Result<DMatrix<C64>, OperatorError> {
    check_pair(d, e)?;
    let n = mesh.dof_count();
    // Sample list of (dof, weight·ê·f, r) over every quadrature point.
    let mut samples: Vec<(usize, f64, Vec3)> = Vec::new();
    for g in triangle_geometry(mesh, rule) {
        for (r, w) in g.pts.iter().zip(&g.w) {
            for slot in 0..3 {
                let Some(dof) = g.dofs[slot] else { continue };
                let proj = dot(sub(*r, g.v[slot]), e) * g.signs[slot] / (2.0 * g.area);
                samples.push((dof, w * proj, *r));
            }
        }
    }
    let c = ETA0 * k * k / (32.0 * PI * PI);
    let mut u = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for (m, wm, rm) in &samples {
        for (nn, wn, rn) in &samples {
            let ph = C64::from_polar(1.0, k * dot(d, sub(*rn, *rm)));
            u[(*m, *nn)] += ph * (c * wm * wn);
        }
    }
    Ok(u)
}

/// Orthonormal polarization pair `(θ̂, φ̂)` for a direction given by angles.
pub fn direction_frame(theta: f64, phi: f64) -> (Vec3, Vec3, Vec3) {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    ([st * cp, st * sp, ct], [ct * cp, ct * sp, -st], [-sp, cp, 0.0])
}
