//! Galerkin EFIE impedance matrix in the mixed-potential form.
//!
//! Basis functions carry one ampere across their edge, so every entry is in ohms.
//! Pairs of triangles closer than `near_factor` diameters have the static part
//! `1/(4πR)` of the kernel integrated analytically over the source triangle.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::mesh::{dot, norm, point, scale, sub, Mesh, Vec3};
use super::quadrature::TriangleRule;
use crate::{C64, ETA0};

#[derive(Clone, Debug)]
pub struct EfieOptions {
    pub rule: TriangleRule,
    /// Triangle pairs whose centroid distance is below this many diameters are
    /// treated with singularity extraction.
    pub near_factor: f64,
}

impl Default for EfieOptions {
    fn default() -> Self {
        Self { rule: TriangleRule::dunavant7(), near_factor: 2.0 }
    }
}

/// Quadrature data of one triangle.
#[derive(Clone, Debug)]
pub(crate) struct TriGeom {
    pub v: [Vec3; 3],
    pub c: Vec3,
    pub n: Vec3,
    pub area: f64,
    pub diam: f64,
    pub pts: Vec<Vec3>,
    pub w: Vec<f64>,
    pub dofs: [Option<usize>; 3],
    pub signs: [f64; 3],
}

pub(crate) fn triangle_geometry(mesh: &Mesh, rule: &TriangleRule) -> Vec<TriGeom> {
    (0..mesh.triangles.len())
        .map(|t| {
            let v = mesh.triangle_vertices(t);
            let area = mesh.areas[t];
            let diam = norm(sub(v[1], v[0])).max(norm(sub(v[2], v[1]))).max(norm(sub(v[0], v[2])));
            let pts = rule.points.iter().map(|b| point(&v, *b)).collect();
            let w = rule.weights.iter().map(|w| w * area).collect();
            let lb = mesh.local[t];
            TriGeom {
                v,
                c: mesh.centroid(t),
                n: mesh.normal(t),
                area,
                diam,
                pts,
                w,
                dofs: [lb[0].dof, lb[1].dof, lb[2].dof],
                signs: [lb[0].sign, lb[1].sign, lb[2].sign],
            }
        })
        .collect()
}

/// Integrals `∫ 1/R dA'` and `∫ (r' - r)/R dA'` over a flat triangle.
pub fn potential_integrals(v: &[Vec3; 3], n: Vec3, r: Vec3) -> (f64, Vec3) {
    let h = dot(sub(r, v[0]), n);
    let rho = sub(r, scale(n, h));
    let ah = h.abs();
    let size = norm(sub(v[1], v[0])) + norm(sub(v[2], v[1])) + norm(sub(v[0], v[2]));
    let tiny = (1e-14 * size) * (1e-14 * size);
    let mut i0 = 0.0;
    let mut i1 = [0.0; 3];
    for i in 0..3 {
        let a = v[i];
        let b = v[(i + 1) % 3];
        let len = norm(sub(b, a));
        let lhat = scale(sub(b, a), 1.0 / len);
        let u = super::mesh::cross(lhat, n);
        let lp = dot(sub(b, rho), lhat);
        let lm = dot(sub(a, rho), lhat);
        let t0 = dot(sub(a, rho), u);
        let r0sq = t0 * t0 + h * h;
        let rp = (lp * lp + r0sq).sqrt();
        let rm = (lm * lm + r0sq).sqrt();
        let f2 = if r0sq > tiny {
            let num = if lp >= 0.0 { rp + lp } else { r0sq / (rp - lp) };
            let den = if lm >= 0.0 { rm + lm } else { r0sq / (rm - lm) };
            (num / den).ln()
        } else {
            0.0
        };
        let mut term = t0 * f2;
        if ah > 0.0 {
            term -= ah * ((t0 * lp).atan2(r0sq + ah * rp) - (t0 * lm).atan2(r0sq + ah * rm));
        }
        i0 += term;
        let c = 0.5 * (r0sq * f2 + lp * rp - lm * rm);
        for k in 0..3 {
            i1[k] += u[k] * c;
        }
    }
    let out = [i1[0] - h * n[0] * i0, i1[1] - h * n[1] * i0, i1[2] - h * n[2] * i0];
    (i0, out)
}

/// Moments of a scalar kernel over a triangle pair, coordinates taken
/// relative to each triangle's centroid.
#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    s0: C64,
    sr: [C64; 3],
    srp: [C64; 3],
    srr: C64,
}

impl Moments {
    fn add(&mut self, o: &Moments) {
        self.s0 += o.s0;
        self.srr += o.srr;
        for k in 0..3 {
            self.sr[k] += o.sr[k];
            self.srp[k] += o.srp[k];
        }
    }
}

fn static_moments(obs: &TriGeom, src: &TriGeom) -> [f64; 8] {
    let mut m = [0.0; 8];
    for (ra, wa) in obs.pts.iter().zip(&obs.w) {
        let (i0, i1) = potential_integrals(&src.v, src.n, *ra);
        let d = sub(*ra, src.c);
        let t1 = [i1[0] + d[0] * i0, i1[1] + d[1] * i0, i1[2] + d[2] * i0];
        let rl = sub(*ra, obs.c);
        m[0] += wa * i0;
        for k in 0..3 {
            m[1 + k] += wa * rl[k] * i0;
            m[4 + k] += wa * t1[k];
        }
        m[7] += wa * dot(rl, t1);
    }
    let s = 1.0 / (4.0 * PI);
    for x in m.iter_mut() {
        *x *= s;
    }
    m
}

/// Symmetrized static moments of a near pair.
fn near_static(p: &TriGeom, q: &TriGeom) -> Moments {
    let a = static_moments(p, q);
    let b = static_moments(q, p);
    let mut m = Moments { s0: C64::new(0.5 * (a[0] + b[0]), 0.0), srr: C64::new(0.5 * (a[7] + b[7]), 0.0), ..Default::default() };
    for k in 0..3 {
        m.sr[k] = C64::new(0.5 * (a[1 + k] + b[4 + k]), 0.0);
        m.srp[k] = C64::new(0.5 * (a[4 + k] + b[1 + k]), 0.0);
    }
    m
}

#[inline]
fn kernel(k: f64, r: f64, smooth: bool) -> C64 {
    let s = 1.0 / (4.0 * PI);
    if smooth {
        if r == 0.0 {
            return C64::new(0.0, -k * s);
        }
        let sn = (k * r).sin();
        let half = (0.5 * k * r).sin();
        C64::new(-2.0 * half * half / r * s, -sn / r * s)
    } else {
        let (sn, cs) = (k * r).sin_cos();
        C64::new(cs / r * s, -sn / r * s)
    }
}

fn dynamic_moments(p: &TriGeom, q: &TriGeom, ks: &[f64], smooth: bool, out: &mut [Moments]) {
    for (ra, wa) in p.pts.iter().zip(&p.w) {
        let rl = sub(*ra, p.c);
        for (ki, &k) in ks.iter().enumerate() {
            let mut t0 = C64::new(0.0, 0.0);
            let mut t1 = [C64::new(0.0, 0.0); 3];
            for (rb, wb) in q.pts.iter().zip(&q.w) {
                let d = sub(*ra, *rb);
                let r = dot(d, d).sqrt();
                let g = kernel(k, r, smooth) * *wb;
                t0 += g;
                let rq = sub(*rb, q.c);
                for c in 0..3 {
                    t1[c] += g * rq[c];
                }
            }
            let m = &mut out[ki];
            m.s0 += t0 * *wa;
            for c in 0..3 {
                m.sr[c] += t0 * (wa * rl[c]);
                m.srp[c] += t1[c] * *wa;
            }
            m.srr += (t1[0] * rl[0] + t1[1] * rl[1] + t1[2] * rl[2]) * *wa;
        }
    }
}

type Block = [[C64; 3]; 3];

fn block_from_moments(p: &TriGeom, q: &TriGeom, m: &Moments, k: f64) -> Block {
    let j = C64::new(0.0, 1.0);
    let ca = j * (k * ETA0 / 4.0);
    let cphi = -j * (ETA0 / k);
    let inv = 1.0 / (p.area * q.area);
    let mut b = [[C64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        if p.dofs[i].is_none() {
            continue;
        }
        let dp = sub(p.v[i], p.c);
        for jj in 0..3 {
            if q.dofs[jj].is_none() {
                continue;
            }
            let dq = sub(q.v[jj], q.c);
            let a = m.srr
                - (m.sr[0] * dq[0] + m.sr[1] * dq[1] + m.sr[2] * dq[2])
                - (m.srp[0] * dp[0] + m.srp[1] * dp[1] + m.srp[2] * dp[2])
                + m.s0 * dot(dp, dq);
            b[i][jj] = (ca * a + cphi * m.s0) * (p.signs[i] * q.signs[jj] * inv);
        }
    }
    b
}

/// Impedance matrices at several wavenumbers sharing one geometric pass.
pub fn assemble_efie_multi(mesh: &Mesh, ks: &[f64], opts: &EfieOptions) -> Vec<DMatrix<C64>> {
    assert!(ks.iter().all(|k| *k > 0.0 && k.is_finite()), "wavenumbers must be positive");
    let geo = triangle_geometry(mesh, &opts.rule);
    let nt = geo.len();
    let n = mesh.dof_count();

    let rows: Vec<Vec<(usize, Vec<Block>)>> = (0..nt)
        .into_par_iter()
        .map(|p| {
            let gp = &geo[p];
            let mut out = Vec::with_capacity(nt - p);
            if gp.dofs.iter().all(Option::is_none) {
                return out;
            }
            let mut mom = vec![Moments::default(); ks.len()];
            for (q, gq) in geo.iter().enumerate().skip(p) {
                if gq.dofs.iter().all(Option::is_none) {
                    continue;
                }
                let dist = norm(sub(gp.c, gq.c));
                let near = dist < opts.near_factor * gp.diam.max(gq.diam);
                mom.iter_mut().for_each(|m| *m = Moments::default());
                dynamic_moments(gp, gq, ks, near, &mut mom);
                if near {
                    let st = near_static(gp, gq);
                    mom.iter_mut().for_each(|m| m.add(&st));
                }
                let blocks = ks.iter().zip(&mom).map(|(&k, m)| block_from_moments(gp, gq, m, k)).collect();
                out.push((q, blocks));
            }
            out
        })
        .collect();

    let mut z = vec![DMatrix::<C64>::zeros(n, n); ks.len()];
    for (p, row) in rows.iter().enumerate() {
        let gp = &geo[p];
        for (q, blocks) in row {
            let gq = &geo[*q];
            for (zk, b) in z.iter_mut().zip(blocks) {
                for i in 0..3 {
                    let Some(m) = gp.dofs[i] else { continue };
                    for jj in 0..3 {
                        let Some(nn) = gq.dofs[jj] else { continue };
                        zk[(m, nn)] += b[i][jj];
                        if *q != p {
                            zk[(nn, m)] += b[i][jj];
                        }
                    }
                }
            }
        }
    }
    for zk in z.iter_mut() {
        for c in 0..n {
            for r in 0..c {
                let s = (zk[(r, c)] + zk[(c, r)]) * 0.5;
                zk[(r, c)] = s;
                zk[(c, r)] = s;
            }
        }
    }
    z
}

/// Vacuum impedance matrix `Z0` at wavenumber `k`.
pub fn assemble_efie(mesh: &Mesh, k: f64, opts: &EfieOptions) -> DMatrix<C64> {
    assemble_efie_multi(mesh, &[k], opts).pop().expect("one wavenumber")
}
