//! Right-hand sides: delta-gap voltage sources and incident plane waves.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::mesh::{dot, norm, point, Mesh, Vec3};
use super::quadrature::TriangleRule;
use super::OperatorError;
use crate::C64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ExcitationSpec {
    /// Voltage impressed across each listed edge (0-based DOF indices).
    DeltaGap { dofs: Vec<usize>, voltage: C64 },
    /// `E0 ê exp(-jk d̂·r)` in V/m.
    PlaneWave { direction: Vec3, polarization: Vec3, amplitude: C64 },
}

impl ExcitationSpec {
    pub fn delta_gap(dof: usize) -> Self {
        ExcitationSpec::DeltaGap { dofs: vec![dof], voltage: C64::new(1.0, 0.0) }
    }

    pub fn gap_dofs(&self) -> &[usize] {
        match self {
            ExcitationSpec::DeltaGap { dofs, .. } => dofs,
            ExcitationSpec::PlaneWave { .. } => &[],
        }
    }

    pub fn validate(&self, n_dof: usize) -> Result<(), OperatorError> {
        match self {
            ExcitationSpec::DeltaGap { dofs, .. } => {
                if dofs.is_empty() {
                    return Err(OperatorError::InvalidExcitation("delta gap needs at least one DOF".into()));
                }
                for &d in dofs {
                    if d >= n_dof {
                        return Err(OperatorError::DofOutOfRange { dof: d, n_dof });
                    }
                }
                Ok(())
            }
            ExcitationSpec::PlaneWave { direction, polarization, .. } => check_pair(*direction, *polarization),
        }
    }
}

/// Checks that `d` and `e` are unit vectors and mutually orthogonal.
pub fn check_pair(d: Vec3, e: Vec3) -> Result<(), OperatorError> {
    if (norm(d) - 1.0).abs() > 1e-9 || (norm(e) - 1.0).abs() > 1e-9 {
        return Err(OperatorError::InvalidExcitation("direction and polarization must be unit vectors".into()));
    }
    if dot(d, e).abs() > 1e-12 {
        return Err(OperatorError::NonOrthogonalPolarization(dot(d, e)));
    }
    Ok(())
}

/// Tested incident field `V_n = ∫ f_n · E_inc dS`.
pub fn assemble_excitation(mesh: &Mesh, spec: &ExcitationSpec, k: f64) -> Result<DVector<C64>, OperatorError> {
    assemble_excitation_with_rule(mesh, spec, k, &TriangleRule::dunavant7())
}

pub fn assemble_excitation_with_rule(
    mesh: &Mesh,
    spec: &ExcitationSpec,
    k: f64,
    rule: &TriangleRule,
) -> Result<DVector<C64>, OperatorError> {
    let n = mesh.dof_count();
    spec.validate(n)?;
    let mut v = DVector::from_element(n, C64::new(0.0, 0.0));
    match spec {
        ExcitationSpec::DeltaGap { dofs, voltage } => {
            for &d in dofs {
                v[d] += *voltage;
            }
        }
        ExcitationSpec::PlaneWave { direction, polarization, amplitude } => {
            for t in 0..mesh.triangles.len() {
                let verts = mesh.triangle_vertices(t);
                let lb = mesh.local[t];
                for (b, w) in rule.points.iter().zip(&rule.weights) {
                    let r = point(&verts, *b);
                    let phase = C64::from_polar(1.0, -k * dot(*direction, r));
                    let wa = w * mesh.areas[t];
                    for slot in 0..3 {
                        let Some(dof) = lb[slot].dof else { continue };
                        let f = mesh.basis_value(t, slot, *b);
                        v[dof] += *amplitude * phase * (wa * dot(f, *polarization));
                    }
                }
            }
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::mesh::{build_mesh, PlateSpec};

    fn plate() -> Mesh {
        build_mesh(&PlateSpec { length_x: 2.0, length_y: 1.0, nx: 6, ny: 3, ka: 0.5 }).unwrap()
    }

    #[test]
    fn delta_gap_is_localized() {
        let m = plate();
        let v = assemble_excitation(&m, &ExcitationSpec::delta_gap(7), 1.0).unwrap();
        for (i, x) in v.iter().enumerate() {
            if i == 7 {
                assert_eq!(*x, C64::new(1.0, 0.0));
            } else {
                assert_eq!(*x, C64::new(0.0, 0.0));
            }
        }
        assert!(assemble_excitation(&m, &ExcitationSpec::delta_gap(10_000), 1.0).is_err());
    }

    #[test]
    fn plane_wave_prefers_aligned_edges() {
        let m = build_mesh(&PlateSpec { length_x: 2.0, length_y: 0.2, nx: 10, ny: 1, ka: 0.3 }).unwrap();
        let spec = ExcitationSpec::PlaneWave {
            direction: [0.0, 0.0, -1.0],
            polarization: [1.0, 0.0, 0.0],
            amplitude: C64::new(1.0, 0.0),
        };
        let v = assemble_excitation(&m, &spec, 0.3).unwrap();
        let (imax, _) = v.iter().enumerate().fold((0, 0.0), |acc, (i, x)| if x.norm() > acc.1 { (i, x.norm()) } else { acc });
        // Vertical edges carry x-directed current.
        let [a, b] = m.interior_edges[imax].vertices;
        assert!((m.vertices[a][0] - m.vertices[b][0]).abs() < 1e-12);
    }

    #[test]
    fn plane_wave_matches_refined_quadrature() {
        let m = plate();
        let spec = ExcitationSpec::PlaneWave {
            direction: [0.6, 0.0, -0.8],
            polarization: [0.8, 0.0, 0.6],
            amplitude: C64::new(2.0, -1.0),
        };
        let k = 3.0;
        let v = assemble_excitation(&m, &spec, k).unwrap();
        let oracle = assemble_excitation_with_rule(&m, &spec, k, &TriangleRule::dunavant7().refined(10)).unwrap();
        assert!((&v - &oracle).norm() <= 1e-6 * oracle.norm());
    }

    #[test]
    fn polarization_must_be_transverse() {
        let spec = ExcitationSpec::PlaneWave {
            direction: [0.0, 0.0, 1.0],
            polarization: [0.0, 0.6, 0.8],
            amplitude: C64::new(1.0, 0.0),
        };
        assert!(matches!(spec.validate(3), Err(OperatorError::NonOrthogonalPolarization(_))));
    }
}
