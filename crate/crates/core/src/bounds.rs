//! Lower bound on the radiation Q-factor of any current supported by the plate.
//!
//! Solves `min IᴴWI` subject to `IᴴR0I = 1` and `IᴴXI = 0` through its scalar
//! dual: for a multiplier `ν` the smallest generalized eigenvalue of
//! `(W + νX, R0)` is a lower bound, and its maximizer over `ν` is the root of
//! `IᴴXI` along the eigenvector branch.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::operators::OperatorSet;
use crate::C64;

#[derive(Debug, Error, PartialEq)]
pub enum BoundError {
    #[error("radiation matrix is numerically zero on the selected DOFs")]
    RankZero,
    #[error("no sign change of IᴴXI over the multiplier bracket [{lo:e}, {hi:e}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("matrix dimensions disagree")]
    Dimension,
    #[error("mask DOF {0} out of range")]
    MaskOutOfRange(usize),
    #[error("bound must be positive, got {0}")]
    NonPositiveBound(f64),
}

#[derive(Clone, Debug)]
pub struct BoundResult {
    pub q_lb: f64,
    /// Optimal current over all DOFs (zero outside the mask), `IᴴR0I = 1`.
    pub optimal_current: DVector<C64>,
    pub nu: f64,
    pub iterations: usize,
    pub residuals: BoundResiduals,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct BoundResiduals {
    /// `|IᴴXI| / IᴴR0I`.
    pub resonance: f64,
    /// `|IᴴR0I - 1|`.
    pub normalization: f64,
    /// `‖(W + νX)I - λR0I‖ / ‖W‖`.
    pub eigen: f64,
}

/// Relative eigenvalue threshold below which `R0` is treated as non-radiating.
pub const DEFLATION_TOL: f64 = 1e-10;
const BISECTION_TOL: f64 = 1e-10;
const MAX_EXPANSIONS: usize = 60;

/// Bound from an assembled operator set, optionally restricted to `mask`.
pub fn solve_bound(ops: &OperatorSet, mask: Option<&[usize]>) -> Result<BoundResult, BoundError> {
    solve_bound_matrices(&ops.w, &ops.r0(), &ops.x0(), mask)
}

/// Bound for explicit real symmetric `W`, `R0` (PSD) and `X`.
pub fn solve_bound_matrices(
    w: &DMatrix<f64>,
    r0: &DMatrix<f64>,
    x: &DMatrix<f64>,
    mask: Option<&[usize]>,
) -> Result<BoundResult, BoundError> {
    let n = w.nrows();
    if w.shape() != (n, n) || r0.shape() != (n, n) || x.shape() != (n, n) {
        return Err(BoundError::Dimension);
    }
    let idx: Vec<usize> = match mask {
        Some(m) => {
            let mut v = m.to_vec();
            v.sort_unstable();
            v.dedup();
            if let Some(&bad) = v.iter().find(|&&d| d >= n) {
                return Err(BoundError::MaskOutOfRange(bad));
            }
            v
        }
        None => (0..n).collect(),
    };
    let sub = |a: &DMatrix<f64>| DMatrix::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])]);
    let (ws, rs, xs) = (sub(w), sub(r0), sub(x));
    let problem = Reduced::new(&ws, &rs, &xs)?;

    let x_norm = xs.norm();
    let w_norm = ws.norm().max(f64::MIN_POSITIVE);
    let (nu, current, iterations) = if x_norm == 0.0 {
        let e = problem.eval(0.0).ok_or(BoundError::RankZero)?;
        (0.0, e.current.map(|c| C64::new(c, 0.0)), 0)
    } else {
        problem.root(w_norm / x_norm)?
    };

    let current = current.unscale(form(&rs, &current).sqrt());
    let quad = |a: &DMatrix<f64>| form(a, &current);
    let (wi, ri, xi) = (quad(&ws), quad(&rs), quad(&xs));
    let lambda = wi / ri;
    let residual = {
        let m = &ws + &xs * nu;
        let mc = m.map(|v| C64::new(v, 0.0));
        let rc = rs.map(|v| C64::new(v, 0.0));
        (&mc * &current - &rc * &current * C64::new(lambda, 0.0)).norm() / w_norm
    };
    let mut full = DVector::zeros(n);
    for (i, &d) in idx.iter().enumerate() {
        full[d] = current[i];
    }
    Ok(BoundResult {
        q_lb: 0.5 * lambda,
        optimal_current: full,
        nu,
        iterations,
        residuals: BoundResiduals { resonance: xi.abs() / ri, normalization: (ri - 1.0).abs(), eigen: residual },
    })
}

/// `q = Q / Q_lb`.
pub fn normalize(value: f64, q_lb: f64) -> Result<f64, BoundError> {
    if q_lb > 0.0 && q_lb.is_finite() {
        Ok(value / q_lb)
    } else {
        Err(BoundError::NonPositiveBound(q_lb))
    }
}

fn form(a: &DMatrix<f64>, i: &DVector<C64>) -> f64 {
    let re = i.map(|c| c.re);
    let im = i.map(|c| c.im);
    re.dot(&(a * &re)) + im.dot(&(a * &im))
}

/// The problem split into the radiating range of `R0` and its null space.
struct Reduced<'a> {
    w: &'a DMatrix<f64>,
    x: &'a DMatrix<f64>,
    /// Orthonormal basis of the range, scaled by `Λ^{-1/2}` column-wise.
    range: DMatrix<f64>,
    null: DMatrix<f64>,
}

struct EigenBranch {
    current: DVector<f64>,
    xi: f64,
}

impl<'a> Reduced<'a> {
    fn new(w: &'a DMatrix<f64>, r0: &DMatrix<f64>, x: &'a DMatrix<f64>) -> Result<Self, BoundError> {
        let n = r0.nrows();
        if n == 0 {
            return Err(BoundError::RankZero);
        }
        let eig = SymmetricEigen::new(r0.clone());
        let lmax = eig.eigenvalues.max();
        if lmax <= 0.0 {
            return Err(BoundError::RankZero);
        }
        let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > DEFLATION_TOL * lmax).collect();
        let drop: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] <= DEFLATION_TOL * lmax).collect();
        let range = DMatrix::from_fn(n, keep.len(), |i, j| {
            eig.eigenvectors[(i, keep[j])] / eig.eigenvalues[keep[j]].sqrt()
        });
        let null = DMatrix::from_fn(n, drop.len(), |i, j| eig.eigenvectors[(i, drop[j])]);
        Ok(Self { w, x, range, null })
    }

    /// Smallest eigenpair at multiplier `nu`, or `None` when `W + νX` is not
    /// positive definite on the null space of `R0` (dual value `-∞`).
    fn eval(&self, nu: f64) -> Option<EigenBranch> {
        let m = self.w + self.x * nu;
        let mr = &m * &self.range;
        let mut t = self.range.transpose() * &mr;
        let mut coupling = None;
        if self.null.ncols() > 0 {
            let mn = &m * &self.null;
            let mnn = self.null.transpose() * &mn;
            let chol = Cholesky::new(mnn)?;
            let mnr = self.null.transpose() * &mr;
            let solved = chol.solve(&mnr);
            t -= mnr.transpose() * &solved;
            coupling = Some(solved);
        }
        let t = (&t + t.transpose()) * 0.5;
        let eig = SymmetricEigen::new(t);
        let (imin, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
        let c = eig.eigenvectors.column(imin).into_owned();
        let mut current = &self.range * &c;
        if let Some(s) = coupling {
            current -= &self.null * (s * &c);
        }
        let xi = current.dot(&(self.x * &current));
        Some(EigenBranch { current, xi })
    }

    /// Sign of `d(dual)/dν = IᴴXI`, with the infeasible sides mapped so that the
    /// dual is increasing on the left of its domain and decreasing on the right.
    fn side(&self, nu: f64) -> (f64, Option<EigenBranch>) {
        match self.eval(nu) {
            Some(b) => (b.xi, Some(b)),
            None => (if nu < 0.0 { 1.0 } else { -1.0 }, None),
        }
    }

    fn root(&self, scale: f64) -> Result<(f64, DVector<C64>, usize), BoundError> {
        let (mut lo, mut hi) = (-scale, scale);
        let (mut s_lo, mut b_lo) = self.side(lo);
        let (mut s_hi, mut b_hi) = self.side(hi);
        let mut expansions = 0;
        while s_lo < 0.0 || s_hi > 0.0 {
            if expansions == MAX_EXPANSIONS {
                return Err(BoundError::NoSignChange { lo, hi });
            }
            expansions += 1;
            if s_lo < 0.0 {
                lo *= 2.0;
                (s_lo, b_lo) = self.side(lo);
            }
            if s_hi > 0.0 {
                hi *= 2.0;
                (s_hi, b_hi) = self.side(hi);
            }
        }
        let mut iterations = 0;
        while hi - lo > BISECTION_TOL * scale.max(lo.abs()).max(hi.abs()) {
            iterations += 1;
            let mid = 0.5 * (lo + hi);
            let (s, b) = self.side(mid);
            if s == 0.0 {
                let b = b.expect("feasible branch");
                return Ok((mid, b.current.map(|c| C64::new(c, 0.0)), iterations));
            }
            if s > 0.0 {
                (lo, b_lo) = (mid, b);
            } else {
                (hi, b_hi) = (mid, b);
            }
        }
        let nu = 0.5 * (lo + hi);
        let (mid_xi, mid_b) = self.side(nu);
        if let Some(b) = mid_b.filter(|b| mid_xi.abs() <= 1e-9 * b.current.norm_squared().max(1.0)) {
            return Ok((nu, b.current.map(|c| C64::new(c, 0.0)), iterations));
        }
        // Two branches straddle the root: combine them as `αI₁ + jβI₂`, which keeps
        // every real symmetric form a convex mix of the two.
        let (a, b) = match (b_lo, b_hi) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(BoundError::NoSignChange { lo, hi }),
        };
        let (xa, xb) = (a.xi, b.xi);
        let (alpha2, beta2) = if xa - xb != 0.0 { (-xb / (xa - xb), xa / (xa - xb)) } else { (1.0, 0.0) };
        let current = a.current.map(|c| C64::new(c * alpha2.max(0.0).sqrt(), 0.0))
            + b.current.map(|c| C64::new(0.0, c * beta2.max(0.0).sqrt()));
        Ok((nu, current, iterations))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn psd(n: usize, rank: usize, seed: u64) -> DMatrix<f64> {
        let b = DMatrix::from_fn(n, rank, |i, j| ((seed as f64 + 1.3) * (i * 5 + j * 11 + 1) as f64).sin());
        &b * b.transpose()
    }

    #[test]
    fn x_zero_gives_generalized_min() {
        let w = psd(5, 5, 1) + DMatrix::identity(5, 5);
        let r = psd(5, 5, 2) + DMatrix::identity(5, 5) * 0.1;
        let x = DMatrix::zeros(5, 5);
        let res = solve_bound_matrices(&w, &r, &x, None).unwrap();
        assert_eq!(res.nu, 0.0);
        // independent: λ_min of R^{-1/2} W R^{-1/2} through Cholesky
        let l = r.clone().cholesky().unwrap().l();
        let li = l.try_inverse().unwrap();
        let t = &li * &w * li.transpose();
        let lmin = SymmetricEigen::new(t).eigenvalues.min();
        assert!((res.q_lb - 0.5 * lmin).abs() < 1e-10 * lmin);
    }

    #[test]
    fn constraint_and_normalization_hold() {
        let n = 8;
        let w = psd(n, n, 3) + DMatrix::identity(n, n);
        let r = psd(n, 3, 4);
        let x = DMatrix::from_fn(n, n, |i, j| ((i + j) as f64 * 0.7).cos() * 0.3);
        let res = solve_bound_matrices(&w, &r, &x, None).unwrap();
        assert!(res.residuals.resonance <= 1e-6, "{:?}", res.residuals);
        assert!(res.residuals.normalization <= 1e-10, "{:?}", res.residuals);
        assert!(res.residuals.eigen <= 1e-8, "{:?}", res.residuals);
    }

    #[test]
    fn normalize_checks_sign() {
        assert_eq!(normalize(36.3, 36.3).unwrap(), 1.0);
        assert!(normalize(1.0, 0.0).is_err());
        assert!(normalize(2.0, 1.0).unwrap() > normalize(1.5, 1.0).unwrap());
    }

    #[test]
    fn rank_zero_rejected() {
        let z = DMatrix::zeros(3, 3);
        assert_eq!(solve_bound_matrices(&DMatrix::identity(3, 3), &z, &z, None).unwrap_err(), BoundError::RankZero);
    }
}
