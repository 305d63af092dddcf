//! Regular spherical vector waves and the factorization `R0 ≈ U1ᵀ U1`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::efie::triangle_geometry;
use super::mesh::{dot, norm, sub, Mesh, Vec3};
use super::quadrature::TriangleRule;
use crate::ETA0;

/// Default truncation `⌈ka + 7 (ka)^{1/3} + 3⌉`.
pub fn default_l_max(ka: f64) -> usize {
    (ka + 7.0 * ka.cbrt() + 3.0).ceil() as usize
}

/// Number of rows of `U1` for a given truncation.
pub fn mode_count(l_max: usize) -> usize {
    2 * (l_max * l_max + 2 * l_max)
}

/// Multi-index of one spherical wave.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WaveIndex {
    /// 1 for TE (magnetic-type) waves, 2 for TM.
    pub tau: u8,
    /// `true` for the cos(mφ) harmonic.
    pub even: bool,
    pub m: usize,
    pub l: usize,
}

/// Row ordering of `U1`: l ascending, then m, then parity (even first), then type.
pub fn wave_indices(l_max: usize) -> Vec<WaveIndex> {
    let mut out = Vec::with_capacity(mode_count(l_max));
    for l in 1..=l_max {
        for m in 0..=l {
            for even in [true, false] {
                if m == 0 && !even {
                    continue;
                }
                for tau in [1, 2] {
                    out.push(WaveIndex { tau, even, m, l });
                }
            }
        }
    }
    out
}

/// Spherical Bessel functions `j_0 … j_{l_max}` at `x ≥ 0`, together with
/// `j_l(x)/x`.
pub fn spherical_bessel(l_max: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    let mut j = vec![0.0; l_max + 1];
    let mut jx = vec![0.0; l_max + 1];
    if x < 1e-2 {
        // x^l/(2l+1)!! (1 - y/(2l+3) + y²/(2(2l+3)(2l+5)) - y³/(6(2l+3)(2l+5)(2l+7))), y = x²/2
        let y = 0.5 * x * x;
        let mut dfact = 1.0;
        for l in 0..=l_max {
            dfact *= (2 * l + 1) as f64;
            let a = (2 * l + 3) as f64;
            let b = (2 * l + 5) as f64;
            let c = (2 * l + 7) as f64;
            let s = 1.0 - y / a + y * y / (2.0 * a * b) - y * y * y / (6.0 * a * b * c);
            let base = s / dfact;
            jx[l] = if l == 0 {
                if x > 0.0 { base / x } else { f64::INFINITY }
            } else {
                x.powi(l as i32 - 1) * base
            };
            j[l] = x.powi(l as i32) * base;
        }
        return (j, jx);
    }
    let start = l_max + 20 + x.ceil() as usize;
    let mut jp1 = 0.0;
    let mut jc = 1e-300;
    let mut tmp = vec![0.0; start + 1];
    tmp[start] = jc;
    for l in (1..=start).rev() {
        let jm1 = (2 * l + 1) as f64 / x * jc - jp1;
        jp1 = jc;
        jc = jm1;
        tmp[l - 1] = jc;
        if jc.abs() > 1e250 {
            for t in tmp.iter_mut().skip(l - 1) {
                *t *= 1e-250;
            }
            jp1 *= 1e-250;
            jc *= 1e-250;
        }
    }
    let (sx, cx) = x.sin_cos();
    let j0 = sx / x;
    let j1 = sx / (x * x) - cx / x;
    let scale = if j0.abs() >= j1.abs() { j0 / tmp[0] } else { j1 / tmp[1] };
    for l in 0..=l_max {
        j[l] = tmp[l] * scale;
        jx[l] = j[l] / x;
    }
    (j, jx)
}

/// Associated Legendre functions without the Condon-Shortley phase.
/// Returns `p[l][m]` for `0 ≤ m ≤ l ≤ l_max`.
fn legendre(l_max: usize, x: f64, s: f64) -> Vec<Vec<f64>> {
    let mut p = vec![vec![0.0; l_max + 1]; l_max + 1];
    let mut pmm = 1.0;
    for m in 0..=l_max {
        if m > 0 {
            pmm *= (2 * m - 1) as f64 * s;
        }
        p[m][m] = pmm;
        if m < l_max {
            p[m + 1][m] = x * (2 * m + 1) as f64 * pmm;
        }
        for l in m + 2..=l_max {
            p[l][m] = ((2 * l - 1) as f64 * x * p[l - 1][m] - (l + m - 1) as f64 * p[l - 2][m]) / (l - m) as f64;
        }
    }
    p
}

fn norm_factor(l: usize, m: usize) -> f64 {
    let mut ratio = 1.0;
    for i in (l - m + 1)..=(l + m) {
        ratio /= i as f64;
    }
    let delta = if m == 0 { 1.0 } else { 2.0 };
    (delta * (2 * l + 1) as f64 * ratio / (4.0 * PI)).sqrt()
}

/// Cartesian field of every regular wave (in [`wave_indices`] order) at `r`.
pub fn regular_waves(l_max: usize, k: f64, r: Vec3) -> Vec<Vec3> {
    let rr = norm(r);
    let (theta, phi) = if rr < 1e-300 {
        (0.5 * PI, 0.0)
    } else {
        let t = (r[2] / rr).clamp(-1.0, 1.0).acos();
        let t = t.clamp(1e-9, PI - 1e-9);
        (t, r[1].atan2(r[0]))
    };
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let rhat = [st * cp, st * sp, ct];
    let that = [ct * cp, ct * sp, -st];
    let phat = [-sp, cp, 0.0];
    let x = k * rr;
    let (j, jx) = spherical_bessel(l_max, x);
    let p = legendre(l_max, ct, st);

    let mut out = Vec::with_capacity(mode_count(l_max));
    for l in 1..=l_max {
        let lf = l as f64;
        let ll = (lf * (lf + 1.0)).sqrt();
        // (x j_l)'/x = j_{l-1} - l j_l / x
        let rd = j[l - 1] - lf * jx[l];
        for m in 0..=l {
            let nm = norm_factor(l, m);
            let plm = p[l][m];
            let plm1 = if l > m { p[l - 1][m] } else { 0.0 };
            let dp = (lf * ct * plm - (l + m) as f64 * plm1) / st;
            let mf = m as f64;
            let (sin_m, cos_m) = (mf * phi).sin_cos();
            for even in [true, false] {
                if m == 0 && !even {
                    continue;
                }
                // Y, ∂Y/∂θ, (1/sinθ) ∂Y/∂φ
                let (y, dth, dph) = if even {
                    (nm * plm * cos_m, nm * dp * cos_m, -mf * nm * plm / st * sin_m)
                } else {
                    (nm * plm * sin_m, nm * dp * sin_m, mf * nm * plm / st * cos_m)
                };
                let te = [
                    j[l] / ll * (dph * that[0] - dth * phat[0]),
                    j[l] / ll * (dph * that[1] - dth * phat[1]),
                    j[l] / ll * (dph * that[2] - dth * phat[2]),
                ];
                let a = ll * jx[l] * y;
                let b = rd / ll;
                let tm = [
                    a * rhat[0] + b * (dth * that[0] + dph * phat[0]),
                    a * rhat[1] + b * (dth * that[1] + dph * phat[1]),
                    a * rhat[2] + b * (dth * that[2] + dph * phat[2]),
                ];
                out.push(te);
                out.push(tm);
            }
        }
    }
    out
}

/// Real projection matrix `U1_{αn} = k √η ∫ u_α · f_n dS`.
pub fn spherical_projection(mesh: &Mesh, k: f64, l_max: usize, rule: &TriangleRule) -> DMatrix<f64> {
    assert!(l_max >= 1, "l_max must be at least 1");
    let rows = mode_count(l_max);
    let n = mesh.dof_count();
    let mut u = DMatrix::zeros(rows, n);
    let c = k * ETA0.sqrt();
    for g in triangle_geometry(mesh, rule) {
        for (r, w) in g.pts.iter().zip(&g.w) {
            let waves = regular_waves(l_max, k, *r);
            for slot in 0..3 {
                let Some(dof) = g.dofs[slot] else { continue };
                let f = {
                    let d = sub(*r, g.v[slot]);
                    let s = g.signs[slot] / (2.0 * g.area);
                    [d[0] * s, d[1] * s, d[2] * s]
                };
                for (a, wave) in waves.iter().enumerate() {
                    u[(a, dof)] += c * w * dot(*wave, f);
                }
            }
        }
    }
    u
}
