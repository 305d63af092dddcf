//! Ohmic surface losses and lumped series elements.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::mesh::{dot, point, sub, Mesh};
use super::quadrature::TriangleRule;
use super::OperatorError;
use crate::C64;

/// Sheet resistivity in ohm per square.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Resistivity {
    Uniform(f64),
    PerTriangle(Vec<f64>),
}

impl Resistivity {
    fn value(&self, t: usize) -> f64 {
        match self {
            Resistivity::Uniform(r) => *r,
            Resistivity::PerTriangle(v) => v[t],
        }
    }

    fn validate(&self, n_tri: usize) -> Result<(), OperatorError> {
        match self {
            Resistivity::Uniform(r) => check_rho(*r),
            Resistivity::PerTriangle(v) => {
                if v.len() != n_tri {
                    return Err(OperatorError::InvalidMaterial(format!(
                        "expected {n_tri} resistivity values, got {}",
                        v.len()
                    )));
                }
                v.iter().try_for_each(|r| check_rho(*r))
            }
        }
    }
}

fn check_rho(r: f64) -> Result<(), OperatorError> {
    if r >= 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(OperatorError::InvalidMaterial(format!("resistivity must be finite and non-negative, got {r}")))
    }
}

/// Gram matrix `∫ ρ f_m · f_n dS`, exact for piecewise-constant `ρ`.
pub fn assemble_material(mesh: &Mesh, rho: &Resistivity) -> Result<DMatrix<f64>, OperatorError> {
    rho.validate(mesh.triangles.len())?;
    let n = mesh.dof_count();
    let mut z = DMatrix::zeros(n, n);
    // The integrand is quadratic, so the degree-2 rule is exact.
    let rule = TriangleRule::gauss3();
    for t in 0..mesh.triangles.len() {
        let r = rho.value(t);
        if r == 0.0 {
            continue;
        }
        let v = mesh.triangle_vertices(t);
        let a = mesh.areas[t];
        let lb = mesh.local[t];
        for i in 0..3 {
            let Some(m) = lb[i].dof else { continue };
            for j in 0..3 {
                let Some(nn) = lb[j].dof else { continue };
                let mut s = 0.0;
                for (b, w) in rule.points.iter().zip(&rule.weights) {
                    let p = point(&v, *b);
                    s += w * dot(sub(p, v[i]), sub(p, v[j]));
                }
                z[(m, nn)] += r * lb[i].sign * lb[j].sign * s / (4.0 * a);
            }
        }
    }
    Ok(z)
}

/// A series RLC element connected across one edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LumpedPort {
    pub dof: usize,
    pub resistance: f64,
    pub inductance: f64,
    /// Farads; `f64::INFINITY` means no capacitor (short).
    pub capacitance: f64,
}

impl LumpedPort {
    pub fn resistor(dof: usize, resistance: f64) -> Self {
        Self { dof, resistance, inductance: 0.0, capacitance: f64::INFINITY }
    }

    pub fn impedance(&self, omega: f64) -> C64 {
        let xc = if self.capacitance.is_infinite() { 0.0 } else { 1.0 / (omega * self.capacitance) };
        C64::new(self.resistance, omega * self.inductance - xc)
    }
}

/// Diagonal of the lumped-element matrix.
pub fn assemble_lumped(ports: &[LumpedPort], omega: f64, n_dof: usize) -> Result<DVector<C64>, OperatorError> {
    let mut d = DVector::from_element(n_dof, C64::new(0.0, 0.0));
    let mut seen = vec![false; n_dof];
    for p in ports {
        if p.dof >= n_dof {
            return Err(OperatorError::DofOutOfRange { dof: p.dof, n_dof });
        }
        if seen[p.dof] {
            return Err(OperatorError::InvalidPort(format!("DOF {} carries more than one port", p.dof)));
        }
        seen[p.dof] = true;
        if !(p.resistance >= 0.0 && p.resistance.is_finite()) || !p.inductance.is_finite() {
            return Err(OperatorError::InvalidPort(format!("port at DOF {} has invalid R or L", p.dof)));
        }
        if p.capacitance == 0.0 || p.capacitance.is_nan() || p.capacitance < 0.0 {
            return Err(OperatorError::InvalidPort(format!(
                "port at DOF {} has capacitance {}; use infinity for no capacitor",
                p.dof, p.capacitance
            )));
        }
        d[p.dof] = p.impedance(omega);
    }
    Ok(d)
}
