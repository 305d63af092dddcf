#![allow(dead_code)]

use momtopo::operators::{build_mesh, AssemblyConfig, OperatorSet, PlateSpec, Resistivity};
use momtopo::reanalysis::LinearSystem;
use momtopo::C64;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Complex symmetric `N×N` system with entries in the unit square and a
/// diagonal shift that keeps it comfortably invertible.
pub fn random_system<R: Rng>(n: usize, rng: &mut R) -> LinearSystem {
    let mut z = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let c = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            z[(i, j)] = c;
            z[(j, i)] = c;
        }
        z[(i, i)] += C64::new(n as f64, 0.5 * n as f64);
    }
    let v = random_vector(n, rng);
    LinearSystem::new(z, v).unwrap()
}

pub fn random_vector<R: Rng>(n: usize, rng: &mut R) -> DVector<C64> {
    DVector::from_fn(n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn rel_err(a: &DVector<C64>, b: &DVector<C64>) -> f64 {
    (a - b).norm() / b.norm()
}

pub fn plate(nx: usize, ny: usize, resistivity: f64) -> OperatorSet {
    let spec = PlateSpec { length_x: 2.0, length_y: 1.0, nx, ny, ka: 0.5 };
    let mesh = build_mesh(&spec).unwrap();
    let mut cfg = AssemblyConfig::for_plate(&spec, &mesh);
    cfg.resistivity = Resistivity::Uniform(resistivity);
    OperatorSet::assemble(&mesh, &cfg).unwrap()
}

/// The 12-DOF toy grid: a 3×2 plate with its centre gap edge fixed.
pub fn toy() -> OperatorSet {
    plate(3, 2, 0.0)
}
