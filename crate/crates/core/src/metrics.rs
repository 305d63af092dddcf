//! Power, energy and port metrics and the composite objectives built from them.
//!
//! Every quadratic form is `½·IᴴAI` in watts for currents in amperes.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, Scalar};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operators::{OperatorSet, Vec3};
use crate::reanalysis::{evaluate_each, CandidateBatch};
use crate::{C64, ETA0};

/// Denominators below this raise errors instead of producing infinities.
pub const DENOMINATOR_GUARD: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("current does not radiate (IᴴR0I = {0:e})")]
    NonRadiating(f64),
    #[error("port {0} carries no current")]
    OpenPort(usize),
    #[error("DOF {0} is not a port")]
    NotPort(usize),
    #[error("DOF {dof} out of range (N_dof = {n_dof})")]
    OutOfRange { dof: usize, n_dof: usize },
    #[error("coupling regions overlap at DOF {0}")]
    OverlappingRegions(usize),
    #[error("direction/polarization pair not present in the far-field rows")]
    UnknownDirection,
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("invalid objective: {0}")]
    InvalidSpec(String),
    #[error("degenerate candidate")]
    Degenerate,
}

fn check_len(n: usize, i: &DVector<C64>) -> Result<(), MetricError> {
    if i.len() == n {
        Ok(())
    } else {
        Err(MetricError::Dimension(format!("operator is {n}×{n}, current has {} entries", i.len())))
    }
}

/// `IᴴAI` for real symmetric `A`.
fn raw_form(a: &DMatrix<f64>, i: &DVector<C64>) -> f64 {
    let re = i.map(|c| c.re);
    let im = i.map(|c| c.im);
    re.dot(&(a * &re)) + im.dot(&(a * &im))
}

/// `½·IᴴAI` for real symmetric `A`.
pub fn quadratic_form(a: &DMatrix<f64>, i: &DVector<C64>) -> Result<f64, MetricError> {
    check_len(a.nrows(), i)?;
    Ok(0.5 * raw_form(a, i))
}

/// `½·IᴴAI` for a general complex `A`.
pub fn quadratic_form_complex(a: &DMatrix<C64>, i: &DVector<C64>) -> Result<C64, MetricError> {
    check_len(a.nrows(), i)?;
    Ok(0.5 * i.dotc(&(a * i)))
}

/// Complex power `½·IᴴV` delivered by the excitation.
pub fn complex_power(i: &DVector<C64>, v: &DVector<C64>) -> Result<C64, MetricError> {
    check_len(v.len(), i)?;
    Ok(0.5 * i.dotc(v))
}

pub fn radiated_power(r0: &DMatrix<f64>, i: &DVector<C64>) -> Result<f64, MetricError> {
    quadratic_form(r0, i)
}

/// `½·|U1·I|²`, the radiated power through the spherical-wave factor.
pub fn radiated_power_linear(u1: &DMatrix<f64>, i: &DVector<C64>) -> Result<f64, MetricError> {
    check_len(u1.ncols(), i)?;
    let re = u1 * i.map(|c| c.re);
    let im = u1 * i.map(|c| c.im);
    Ok(0.5 * (re.norm_squared() + im.norm_squared()))
}

/// Ohmic loss `½·IᴴRρI` plus `½·Σ|I_l|² Re Z_L,l` over lumped elements.
pub fn lost_power(zrho: &DMatrix<f64>, zl: &DVector<C64>, i: &DVector<C64>) -> Result<f64, MetricError> {
    check_len(zl.len(), i)?;
    let lumped: f64 = zl.iter().zip(i.iter()).map(|(z, c)| c.norm_sqr() * z.re).sum();
    Ok(quadratic_form(zrho, i)? + 0.5 * lumped)
}

/// Time-averaged energy `IᴴAI / (4ω)` in joules for `A ∈ {W, Xm, Xe}`.
pub fn stored_energy(a: &DMatrix<f64>, omega: f64, i: &DVector<C64>) -> Result<f64, MetricError> {
    Ok(quadratic_form(a, i)? / (2.0 * omega))
}

fn guard(den: f64) -> Result<f64, MetricError> {
    if den.abs() < DENOMINATOR_GUARD || !den.is_finite() {
        Err(MetricError::NonRadiating(den))
    } else {
        Ok(den)
    }
}

/// Untuned Q-factor `½·IᴴWI / IᴴR0I`.
pub fn q_untuned(i: &DVector<C64>, w: &DMatrix<f64>, r0: &DMatrix<f64>) -> Result<f64, MetricError> {
    check_len(w.nrows(), i)?;
    check_len(r0.nrows(), i)?;
    Ok(0.5 * raw_form(w, i) / guard(raw_form(r0, i))?)
}

/// Matching part of the Q-factor `|IᴴXI| / IᴴR0I`.
pub fn q_matching(i: &DVector<C64>, x: &DMatrix<f64>, r0: &DMatrix<f64>) -> Result<f64, MetricError> {
    check_len(x.nrows(), i)?;
    check_len(r0.nrows(), i)?;
    Ok(raw_form(x, i).abs() / guard(raw_form(r0, i))?)
}

pub fn port_current(i: &DVector<C64>, n: usize) -> Result<C64, MetricError> {
    i.get(n).copied().ok_or(MetricError::OutOfRange { dof: n, n_dof: i.len() })
}

/// `Z_in = IᴴZI / |I_n|²`; equals `V_n / I_n` for a single driven edge.
pub fn input_impedance(i: &DVector<C64>, z: &DMatrix<C64>, n: usize) -> Result<C64, MetricError> {
    check_len(z.nrows(), i)?;
    let iin = port_current(i, n)?;
    let den = iin.norm_sqr();
    if den < DENOMINATOR_GUARD {
        return Err(MetricError::OpenPort(n));
    }
    Ok(i.dotc(&(z * i)) / den)
}

fn check_region(n: usize, d: &[usize]) -> Result<Vec<bool>, MetricError> {
    let mut mask = vec![false; n];
    for &k in d {
        if k >= n {
            return Err(MetricError::OutOfRange { dof: k, n_dof: n });
        }
        mask[k] = true;
    }
    Ok(mask)
}

/// `DᵀAD`: `A` with every row and column outside `d` zeroed.
pub fn subregion_operator<T: Scalar + Copy + num_traits::Zero>(
    a: &DMatrix<T>,
    d: &[usize],
) -> Result<DMatrix<T>, MetricError> {
    let m = check_region(a.nrows(), d)?;
    Ok(DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| if m[i] && m[j] { a[(i, j)] } else { T::zero() }))
}

/// `D₁ᵀAD₂`: the block coupling region `d1` (rows) to `d2` (columns).
pub fn coupling_operator<T: Scalar + Copy + num_traits::Zero>(
    a: &DMatrix<T>,
    d1: &[usize],
    d2: &[usize],
) -> Result<DMatrix<T>, MetricError> {
    let m1 = check_region(a.nrows(), d1)?;
    let m2 = check_region(a.nrows(), d2)?;
    if let Some(k) = (0..a.nrows()).find(|&k| m1[k] && m2[k]) {
        return Err(MetricError::OverlappingRegions(k));
    }
    Ok(DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| if m1[i] && m2[j] { a[(i, j)] } else { T::zero() }))
}

/// Scalar objective over currents on an explicit DOF list.
pub trait Objective: Sync {
    fn evaluate(&self, dofs: &[usize], current: &DVector<C64>) -> Result<f64, MetricError>;

    /// Values for every candidate of a batch, aligned with its candidate list.
    fn evaluate_batch(&self, batch: &CandidateBatch<'_>) -> Vec<Result<f64, MetricError>> {
        evaluate_each(batch, |d, c| self.evaluate(d, c))
    }
}

impl<F> Objective for F
where
    F: Fn(&[usize], &DVector<C64>) -> Result<f64, MetricError> + Sync,
{
    fn evaluate(&self, dofs: &[usize], current: &DVector<C64>) -> Result<f64, MetricError> {
        self(dofs, current)
    }
}

/// One weighted term of a composite objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TermKind {
    QUntuned,
    QMatching,
    RadiatedPower,
    LostPower,
    /// `|F·I|² / (2η₀)` for a direction stored in the far-field rows.
    RadiationIntensity { direction: Vec3, polarization: Vec3 },
    /// `|Z_in − Z_t| / |Z_t|`; `port` defaults to the first delta-gap edge.
    InputImpedanceTarget {
        #[serde(default)]
        port: Option<usize>,
        target: [f64; 2],
    },
    /// `½·IᴴAI` with `A` one of `r0`, `x0`, `w`, `xm`, `xe`, `rrho`.
    Custom { operator: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    #[serde(flatten)]
    pub kind: TermKind,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub terms: Vec<Term>,
    /// DOFs the operators are masked to; all DOFs when absent.
    #[serde(default)]
    pub eval_domain: Option<Vec<usize>>,
    /// Divides the composite value, typically by `Q_lb`.
    #[serde(default)]
    pub normalization: Option<f64>,
}

impl ObjectiveSpec {
    /// `w₁·Q_U + w₂·Q_E`.
    pub fn q_composite(w1: f64, w2: f64) -> Self {
        Self {
            terms: vec![
                Term { kind: TermKind::QUntuned, weight: w1 },
                Term { kind: TermKind::QMatching, weight: w2 },
            ],
            eval_domain: None,
            normalization: None,
        }
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        if self.terms.is_empty() {
            return Err(MetricError::InvalidSpec("no terms".into()));
        }
        if self.terms.iter().any(|t| !t.weight.is_finite()) {
            return Err(MetricError::InvalidSpec("weights must be finite".into()));
        }
        if self.terms.iter().all(|t| t.weight == 0.0) {
            return Err(MetricError::InvalidSpec("at least one weight must be nonzero".into()));
        }
        if let Some(q) = self.normalization {
            if !(q > 0.0 && q.is_finite()) {
                return Err(MetricError::InvalidSpec(format!("normalization must be positive, got {q}")));
            }
        }
        for t in &self.terms {
            if let TermKind::InputImpedanceTarget { target, .. } = &t.kind {
                if C64::new(target[0], target[1]).norm() == 0.0 || !target.iter().all(|x| x.is_finite()) {
                    return Err(MetricError::InvalidSpec("impedance target must be finite and nonzero".into()));
                }
            }
        }
        Ok(())
    }

    pub fn compile(&self, ops: &OperatorSet) -> Result<CompositeObjective, MetricError> {
        CompositeObjective::new(self, ops)
    }
}

/// Keys of the quadratic operators a compiled objective uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Op {
    R0,
    X0,
    W,
    Xm,
    Xe,
    Rrho,
    Loss,
    SysRe,
    SysIm,
}

impl Op {
    fn by_name(name: &str) -> Option<Self> {
        Some(match name.to_ascii_lowercase().as_str() {
            "r0" => Op::R0,
            "x0" => Op::X0,
            "w" => Op::W,
            "xm" => Op::Xm,
            "xe" => Op::Xe,
            "rrho" => Op::Rrho,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug)]
enum Compiled {
    QUntuned,
    QMatching,
    Form(Op),
    Intensity(usize),
    Impedance { port: usize, target: C64 },
}

/// An [`ObjectiveSpec`] bound to the operators of one discretization.
#[derive(Clone, Debug)]
pub struct CompositeObjective {
    n: usize,
    terms: Vec<(Compiled, f64)>,
    ops: HashMap<Op, DMatrix<f64>>,
    rows: Vec<DVector<C64>>,
    scale: f64,
}

impl CompositeObjective {
    fn new(spec: &ObjectiveSpec, set: &OperatorSet) -> Result<Self, MetricError> {
        spec.validate()?;
        let n = set.n_dof();
        let mask = match &spec.eval_domain {
            Some(d) => Some(check_region(n, d)?),
            None => None,
        };
        let masked = |a: DMatrix<f64>| match &mask {
            Some(m) => DMatrix::from_fn(n, n, |i, j| if m[i] && m[j] { a[(i, j)] } else { 0.0 }),
            None => a,
        };
        let mut ops: HashMap<Op, DMatrix<f64>> = HashMap::new();
        let need = |op: Op, ops: &mut HashMap<Op, DMatrix<f64>>| {
            ops.entry(op).or_insert_with(|| match op {
                Op::R0 => masked(set.r0()),
                Op::X0 => masked(set.x0()),
                Op::W => masked(set.w.clone()),
                Op::Xm => masked(set.xm.clone()),
                Op::Xe => masked(set.xe.clone()),
                Op::Rrho => masked(set.zrho.clone()),
                Op::Loss => masked(set.loss_matrix()),
                // port quantities see the whole structure
                Op::SysRe => set.system_matrix().map(|c| c.re),
                Op::SysIm => set.system_matrix().map(|c| c.im),
            });
        };
        let mut terms = Vec::new();
        let mut rows = Vec::new();
        for t in spec.terms.iter().filter(|t| t.weight != 0.0) {
            let c = match &t.kind {
                TermKind::QUntuned => {
                    need(Op::W, &mut ops);
                    need(Op::R0, &mut ops);
                    Compiled::QUntuned
                }
                TermKind::QMatching => {
                    need(Op::X0, &mut ops);
                    need(Op::R0, &mut ops);
                    Compiled::QMatching
                }
                TermKind::RadiatedPower => {
                    need(Op::R0, &mut ops);
                    Compiled::Form(Op::R0)
                }
                TermKind::LostPower => {
                    need(Op::Loss, &mut ops);
                    Compiled::Form(Op::Loss)
                }
                TermKind::RadiationIntensity { direction, polarization } => {
                    let k = set.farfield_index(*direction, *polarization).ok_or(MetricError::UnknownDirection)?;
                    let row = DVector::from_fn(n, |i, _| match &mask {
                        Some(m) if !m[i] => C64::new(0.0, 0.0),
                        _ => set.f_rows[(k, i)],
                    });
                    rows.push(row);
                    Compiled::Intensity(rows.len() - 1)
                }
                TermKind::InputImpedanceTarget { port, target } => {
                    let port = match port {
                        Some(p) => *p,
                        None => *set.gap_dofs.first().ok_or_else(|| {
                            MetricError::InvalidSpec("impedance target needs a port or a delta-gap feed".into())
                        })?,
                    };
                    if port >= n {
                        return Err(MetricError::OutOfRange { dof: port, n_dof: n });
                    }
                    if !set.gap_dofs.contains(&port) {
                        return Err(MetricError::NotPort(port));
                    }
                    need(Op::SysRe, &mut ops);
                    need(Op::SysIm, &mut ops);
                    Compiled::Impedance { port, target: C64::new(target[0], target[1]) }
                }
                TermKind::Custom { operator } => {
                    let op = Op::by_name(operator).ok_or_else(|| MetricError::UnknownOperator(operator.clone()))?;
                    need(op, &mut ops);
                    Compiled::Form(op)
                }
            };
            terms.push((c, t.weight));
        }
        Ok(Self { n, terms, ops, rows, scale: spec.normalization.map_or(1.0, |q| 1.0 / q) })
    }

    pub fn n_dof(&self) -> usize {
        self.n
    }

    fn combine(&self, v: &Values<'_>) -> Result<f64, MetricError> {
        let mut total = 0.0;
        for (term, w) in &self.terms {
            let value = match term {
                Compiled::QUntuned => 0.5 * v.form(Op::W) / guard(v.form(Op::R0))?,
                Compiled::QMatching => v.form(Op::X0).abs() / guard(v.form(Op::R0))?,
                Compiled::Form(op) => 0.5 * v.form(*op),
                Compiled::Intensity(k) => v.linear[*k].norm_sqr() / (2.0 * ETA0),
                Compiled::Impedance { port, target } => {
                    let den = v.port[port].norm_sqr();
                    if den < DENOMINATOR_GUARD {
                        return Err(MetricError::OpenPort(*port));
                    }
                    let zin = C64::new(v.form(Op::SysRe), v.form(Op::SysIm)) / den;
                    (zin - target).norm() / target.norm()
                }
            };
            total += w * value;
        }
        Ok(total * self.scale)
    }

    fn ports(&self) -> Vec<usize> {
        let mut p: Vec<usize> = self
            .terms
            .iter()
            .filter_map(|(t, _)| if let Compiled::Impedance { port, .. } = t { Some(*port) } else { None })
            .collect();
        p.sort_unstable();
        p.dedup();
        p
    }
}

struct Values<'a> {
    forms: &'a HashMap<Op, f64>,
    linear: &'a [C64],
    port: &'a HashMap<usize, C64>,
}

impl Values<'_> {
    fn form(&self, op: Op) -> f64 {
        self.forms[&op]
    }
}

impl Objective for CompositeObjective {
    fn evaluate(&self, dofs: &[usize], current: &DVector<C64>) -> Result<f64, MetricError> {
        if dofs.len() != current.len() {
            return Err(MetricError::Dimension("DOF list and current differ in length".into()));
        }
        let mut full = DVector::zeros(self.n);
        for (&d, &c) in dofs.iter().zip(current.iter()) {
            if d >= self.n {
                return Err(MetricError::OutOfRange { dof: d, n_dof: self.n });
            }
            full[d] = c;
        }
        let forms: HashMap<Op, f64> = self.ops.iter().map(|(k, a)| (*k, raw_form(a, &full))).collect();
        let linear: Vec<C64> = self.rows.iter().map(|r| r.dot(&full)).collect();
        let port: HashMap<usize, C64> = self.ports().into_iter().map(|p| (p, full[p])).collect();
        self.combine(&Values { forms: &forms, linear: &linear, port: &port })
    }

    fn evaluate_batch(&self, batch: &CandidateBatch<'_>) -> Vec<Result<f64, MetricError>> {
        let forms: HashMap<Op, Vec<f64>> = self.ops.iter().map(|(k, a)| (*k, batch.quadratic_forms(a))).collect();
        let linear: Vec<Vec<C64>> = self.rows.iter().map(|r| batch.linear_forms(r)).collect();
        let ports: HashMap<usize, Vec<C64>> = self.ports().into_iter().map(|p| (p, batch.entries(p))).collect();
        (0..batch.len())
            .map(|idx| {
                let f: HashMap<Op, f64> = forms.iter().map(|(k, v)| (*k, v[idx])).collect();
                let l: Vec<C64> = linear.iter().map(|v| v[idx]).collect();
                let p: HashMap<usize, C64> = ports.iter().map(|(k, v)| (*k, v[idx])).collect();
                self.combine(&Values { forms: &f, linear: &l, port: &p })
            })
            .collect()
    }
}

/// Summary of one current for reports.
#[derive(Clone, Debug, Serialize)]
pub struct MetricsReport {
    pub q_untuned: Option<f64>,
    pub q_matching: Option<f64>,
    pub q: Option<f64>,
    pub radiated_power: f64,
    pub lost_power: f64,
    pub complex_power: [f64; 2],
    pub input_impedance: Vec<(usize, [f64; 2])>,
}

/// Evaluates the standard metrics on a full-length current.
pub fn report(ops: &OperatorSet, i: &DVector<C64>) -> Result<MetricsReport, MetricError> {
    let r0 = ops.r0();
    let qu = q_untuned(i, &ops.w, &r0).ok();
    let qe = q_matching(i, &ops.x0(), &r0).ok();
    let cp = complex_power(i, &ops.v)?;
    let z = ops.system_matrix();
    let input_impedance = ops
        .gap_dofs
        .iter()
        .filter_map(|&n| input_impedance(i, &z, n).ok().map(|zz| (n, [zz.re, zz.im])))
        .collect();
    Ok(MetricsReport {
        q_untuned: qu,
        q_matching: qe,
        q: qu.zip(qe).map(|(a, b)| a + b),
        radiated_power: radiated_power(&r0, i)?,
        lost_power: lost_power(&ops.zrho, &ops.zl, i)?,
        complex_power: [cp.re, cp.im],
        input_impedance,
    })
}
