mod common;

use momtopo::bounds::{solve_bound, solve_bound_matrices, BoundError};
use momtopo::metrics::ObjectiveSpec;
use momtopo::optimizer::{memetic_run, MemeticConfig};
use momtopo::reanalysis::LinearSystem;
use momtopo::shapes::Gene;
use momtopo::C64;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn psd<R: Rng>(n: usize, rank: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(rank, n, |_, _| rng.random_range(-1.0..1.0));
    a.transpose() * a
}

fn form(a: &DMatrix<f64>, i: &DVector<C64>) -> f64 {
    let ac = a.map(|v| C64::new(v, 0.0));
    i.dotc(&(ac * i)).re
}

/// `½(IᴴWI + |IᴴXI|) / IᴴR0I`: Q after tuning with an ideal lumped reactance.
fn tuned_q(w: &DMatrix<f64>, r0: &DMatrix<f64>, x: &DMatrix<f64>, i: &DVector<C64>) -> f64 {
    0.5 * (form(w, i) + form(x, i).abs()) / form(r0, i)
}

fn random_current<R: Rng>(n: usize, rng: &mut R) -> DVector<C64> {
    DVector::from_fn(n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

#[test]
fn monte_carlo_never_beats_the_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 6;
    // Xm, Xe ⪰ 0 as for physical stored energies; R0 rank deficient
    let xm = psd(n, n, &mut rng);
    let xe = psd(n, n, &mut rng) * 3.0;
    let r0 = psd(n, 4, &mut rng);
    let (w, x) = (&xm + &xe, &xm - &xe);
    let b = solve_bound_matrices(&w, &r0, &x, None).unwrap();

    let mut best = f64::INFINITY;
    for _ in 0..1_000_000 {
        best = best.min(tuned_q(&w, &r0, &x, &random_current(n, &mut rng)));
    }
    let scale = b.optimal_current.norm();
    for _ in 0..100_000 {
        let eps = 10f64.powf(rng.random_range(-6.0..-1.0)) * scale;
        let i = &b.optimal_current + random_current(n, &mut rng) * C64::new(eps, 0.0);
        best = best.min(tuned_q(&w, &r0, &x, &i));
    }
    assert!(best >= b.q_lb * (1.0 - 1e-3), "sampled {best} beats bound {}", b.q_lb);
    // the bound is attained, so sampling near the optimum gets close
    assert!(best <= b.q_lb * 1.01, "sampled {best} vs bound {}", b.q_lb);
}

#[test]
fn optimal_current_attains_the_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for n in [3, 5, 8, 12] {
        let xm = psd(n, n, &mut rng);
        let xe = psd(n, n, &mut rng) * 2.0;
        let r0 = psd(n, n - 1, &mut rng);
        let (w, x) = (&xm + &xe, &xm - &xe);
        let b = solve_bound_matrices(&w, &r0, &x, None).unwrap();
        let q = tuned_q(&w, &r0, &x, &b.optimal_current);
        assert!((q - b.q_lb).abs() <= 1e-8 * b.q_lb, "n={n}: {q} vs {}", b.q_lb);
        assert!(b.residuals.eigen <= 1e-8);
        assert!(b.residuals.resonance <= 1e-8);
    }
}

#[test]
fn plate_bound_residuals() {
    let ops = common::plate(8, 4, 0.0);
    let b = solve_bound(&ops, None).unwrap();
    assert!(b.residuals.eigen <= 1e-8, "{:?}", b.residuals);
    assert!(b.residuals.resonance <= 1e-8, "{:?}", b.residuals);
    assert!(b.residuals.normalization <= 1e-10, "{:?}", b.residuals);
}

#[test]
fn masking_never_decreases_the_plate_bound() {
    let ops = common::plate(6, 3, 0.0);
    let full = solve_bound(&ops, None).unwrap().q_lb;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let n = ops.n_dof();
    let mut nested: Vec<usize> = (0..n).collect();
    let mut prev = full;
    while nested.len() > n / 2 {
        nested.remove(rng.random_range(0..nested.len()));
        let q = solve_bound(&ops, Some(&nested)).unwrap().q_lb;
        assert!(q >= prev * (1.0 - 1e-9), "{q} < {prev} with {} DOFs", nested.len());
        prev = q;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn masking_never_decreases_the_bound(seed in any::<u64>(), n in 4usize..10, drop in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xm = psd(n, n, &mut rng);
        let xe = psd(n, n, &mut rng);
        let r0 = psd(n, n, &mut rng);
        let (w, x) = (&xm + &xe, &xm - &xe);
        let full = solve_bound_matrices(&w, &r0, &x, None);
        prop_assume!(full.is_ok());
        let full = full.unwrap().q_lb;
        let mut mask: Vec<usize> = (0..n).collect();
        for _ in 0..drop {
            mask.remove(rng.random_range(0..mask.len()));
        }
        match solve_bound_matrices(&w, &r0, &x, Some(&mask)) {
            Ok(b) => prop_assert!(b.q_lb >= full * (1.0 - 1e-9), "{} < {}", b.q_lb, full),
            // no resonant current on the mask: the bound is +∞
            Err(BoundError::NoSignChange { .. }) => prop_assert!(definite(&x, &mask)),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}

fn definite(x: &DMatrix<f64>, mask: &[usize]) -> bool {
    let sub = DMatrix::from_fn(mask.len(), mask.len(), |i, j| x[(mask[i], mask[j])]);
    let e = sub.symmetric_eigenvalues();
    e.iter().all(|&v| v > 0.0) || e.iter().all(|&v| v < 0.0)
}

#[test]
fn definite_reactance_has_no_resonant_current() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let n = 5;
    let (xm, xe, r0) = (psd(n, n, &mut rng) * 4.0, psd(n, n, &mut rng) * 0.01, psd(n, n, &mut rng));
    let x = &xm - &xe;
    assert!(definite(&x, &(0..n).collect::<Vec<_>>()));
    assert!(matches!(solve_bound_matrices(&(&xm + &xe), &r0, &x, None), Err(BoundError::NoSignChange { .. })));
}

#[test]
fn optimizer_never_beats_the_bound() {
    let ops = common::toy();
    let sys = LinearSystem::from_operators(&ops);
    let obj = ObjectiveSpec::q_composite(1.0, 0.5).compile(&ops).unwrap();
    let q_lb = solve_bound(&ops, None).unwrap().q_lb;
    let template = Gene::zeros(ops.n_dof(), &ops.gap_dofs).unwrap();
    for seed in 0..5 {
        let cfg = MemeticConfig { n_agents: 6, j_max: 6, seed, ..Default::default() };
        let r = memetic_run(&sys, &obj, &template, &cfg, Some(q_lb)).unwrap();
        for row in &r.trace {
            let q = row.q.unwrap();
            assert!(q >= 1.0 - 1e-6, "seed {seed}: q = {q}");
        }
    }
}
