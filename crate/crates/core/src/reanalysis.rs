//! Exact reanalysis of single-DOF removals and additions.
//!
//! A [`ReanalysisState`] holds the admittance `Y = Z_G⁻¹` over the active DOFs
//! `G` of one shape. Removing edge `r` perturbs the current to
//! `I - (I_r / Y_rr)·y_r` with `y_r` the `r`-th column of `Y`; adding edge `a`
//! borders the system with the Schur complement `s = Z_aa - z_aᵀ Y z_a`. Both
//! the perturbed currents and the committed admittances follow without any
//! re-factorization.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::metrics::{MetricError, Objective};
use crate::operators::OperatorSet;
use crate::shapes::Gene;
use crate::C64;

/// Relative threshold for `|Y_rr|` and `|s|` below which a candidate is degenerate.
pub const PIVOT_TOL: f64 = 1e-14;
/// Residual above which a committed state is rebuilt from scratch.
pub const DRIFT_TOL: f64 = 1e-7;
/// Relative τ difference treated as a tie.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReanalysisError {
    #[error("active set is empty")]
    Empty,
    #[error("truncated impedance matrix is singular (reciprocal condition estimate {rcond:e})")]
    Singular { rcond: f64 },
    #[error("degenerate pivot removing DOF {dof}: |Y_rr| = {pivot:e}")]
    DegeneratePivot { dof: usize, pivot: f64 },
    #[error("degenerate Schur complement adding DOF {dof}: |s| = {schur:e}")]
    DegenerateSchur { dof: usize, schur: f64 },
    #[error("DOF {0} is not active")]
    NotActive(usize),
    #[error("DOF {0} is already active")]
    AlreadyActive(usize),
    #[error("DOF {dof} out of range (N_dof = {n_dof})")]
    OutOfRange { dof: usize, n_dof: usize },
    #[error("system dimensions disagree")]
    Dimension,
}

/// Full impedance matrix and excitation all states are truncated from.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub z: DMatrix<C64>,
    pub v: DVector<C64>,
}

impl LinearSystem {
    pub fn new(z: DMatrix<C64>, v: DVector<C64>) -> Result<Self, ReanalysisError> {
        if z.nrows() != z.ncols() || z.nrows() != v.len() {
            return Err(ReanalysisError::Dimension);
        }
        Ok(Self { z, v })
    }

    /// `Z0 + Zρ + Z_L` with the assembled excitation.
    pub fn from_operators(ops: &OperatorSet) -> Self {
        Self { z: ops.system_matrix(), v: ops.v.clone() }
    }

    pub fn n_dof(&self) -> usize {
        self.v.len()
    }

    /// Direct solve of the system truncated to `dofs` (sorted ascending).
    pub fn solve_truncated(&self, dofs: &[usize]) -> Option<DVector<C64>> {
        let zg = truncate_operator(&self.z, dofs);
        let vg = DVector::from_iterator(dofs.len(), dofs.iter().map(|&d| self.v[d]));
        zg.lu().solve(&vg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Remove,
    Add,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Remove => "remove",
            Action::Add => "add",
        }
    }
}

/// Current over an explicit sorted DOF list.
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbed {
    pub dofs: Vec<usize>,
    pub current: DVector<C64>,
}

#[derive(Clone, Debug)]
pub struct ReanalysisState {
    active: Vec<usize>,
    index_map: Vec<Option<usize>>,
    y: DMatrix<C64>,
    v: DVector<C64>,
    i: DVector<C64>,
    y_norm: f64,
    probe: usize,
    commits: usize,
    refactors: usize,
}

impl ReanalysisState {
    /// Factorizes the system truncated to the active DOFs of `gene`.
    pub fn from_gene(sys: &LinearSystem, gene: &Gene) -> Result<Self, ReanalysisError> {
        if gene.n_dof() != sys.n_dof() {
            return Err(ReanalysisError::Dimension);
        }
        Self::new(sys, &gene.active_dofs())
    }

    pub fn new(sys: &LinearSystem, active: &[usize]) -> Result<Self, ReanalysisError> {
        let n = sys.n_dof();
        let mut active = active.to_vec();
        active.sort_unstable();
        active.dedup();
        if active.is_empty() {
            return Err(ReanalysisError::Empty);
        }
        if let Some(&d) = active.iter().find(|&&d| d >= n) {
            return Err(ReanalysisError::OutOfRange { dof: d, n_dof: n });
        }
        let mut index_map = vec![None; n];
        for (k, &d) in active.iter().enumerate() {
            index_map[d] = Some(k);
        }
        let v = DVector::from_iterator(active.len(), active.iter().map(|&d| sys.v[d]));
        let mut s = Self {
            active,
            index_map,
            y: DMatrix::zeros(0, 0),
            v,
            i: DVector::zeros(0),
            y_norm: 0.0,
            probe: 0,
            commits: 0,
            refactors: 0,
        };
        s.factorize(sys)?;
        Ok(s)
    }

    fn factorize(&mut self, sys: &LinearSystem) -> Result<(), ReanalysisError> {
        let zg = truncate_operator(&sys.z, &self.active);
        let y = zg.clone().lu().try_inverse().ok_or(ReanalysisError::Singular { rcond: 0.0 })?;
        let rcond = 1.0 / (norm1(&zg) * norm1(&y));
        if !(rcond > f64::EPSILON) {
            return Err(ReanalysisError::Singular { rcond });
        }
        self.y = (&y + y.transpose()) * C64::new(0.5, 0.0);
        self.i = &self.y * &self.v;
        self.y_norm = self.y.norm();
        Ok(())
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn local_index(&self, dof: usize) -> Option<usize> {
        self.index_map.get(dof).copied().flatten()
    }

    pub fn admittance(&self) -> &DMatrix<C64> {
        &self.y
    }

    pub fn excitation(&self) -> &DVector<C64> {
        &self.v
    }

    pub fn current(&self) -> &DVector<C64> {
        &self.i
    }

    /// Current scattered to all `N_dof` entries (zero on inactive DOFs).
    pub fn full_current(&self) -> DVector<C64> {
        let mut out = DVector::zeros(self.index_map.len());
        for (k, &d) in self.active.iter().enumerate() {
            out[d] = self.i[k];
        }
        out
    }

    pub fn commits(&self) -> usize {
        self.commits
    }

    pub fn refactors(&self) -> usize {
        self.refactors
    }

    /// `‖Y·Z_G − Id‖_F`, an O(M³) check.
    pub fn inverse_residual(&self, sys: &LinearSystem) -> f64 {
        let zg = truncate_operator(&sys.z, &self.active);
        let m = self.len();
        (cgemm(&self.y, &zg) - DMatrix::<C64>::identity(m, m)).norm()
    }

    pub fn remove_current(&self, r: usize) -> Result<Perturbed, ReanalysisError> {
        let (lr, c) = self.removal_coefficient(r)?;
        let y = self.y.column(lr);
        let current = DVector::from_iterator(
            self.len() - 1,
            (0..self.len()).filter(|&k| k != lr).map(|k| self.i[k] - c * y[k]),
        );
        let dofs = self.active.iter().copied().filter(|&d| d != r).collect();
        Ok(Perturbed { dofs, current })
    }

    fn removal_coefficient(&self, r: usize) -> Result<(usize, C64), ReanalysisError> {
        let lr = self.local_index(r).ok_or(ReanalysisError::NotActive(r))?;
        let pivot = self.y[(lr, lr)];
        if pivot.norm() < PIVOT_TOL * self.y_norm {
            return Err(ReanalysisError::DegeneratePivot { dof: r, pivot: pivot.norm() });
        }
        Ok((lr, self.i[lr] / pivot))
    }

    /// `x_a = Y z_a`, the Schur complement `s` and the new coefficient `i_a`.
    fn addition_terms(&self, sys: &LinearSystem, a: usize) -> Result<(DVector<C64>, C64, C64), ReanalysisError> {
        self.check_addable(sys, a)?;
        let za = DVector::from_iterator(self.len(), self.active.iter().map(|&d| sys.z[(d, a)]));
        let x = &self.y * &za;
        let zaa = sys.z[(a, a)];
        let s = zaa - za.dot(&x);
        if s.norm() < PIVOT_TOL * zaa.norm() || s.norm() == 0.0 {
            return Err(ReanalysisError::DegenerateSchur { dof: a, schur: s.norm() });
        }
        let c = (sys.v[a] - za.dot(&self.i)) / s;
        Ok((x, s, c))
    }

    fn check_addable(&self, sys: &LinearSystem, a: usize) -> Result<(), ReanalysisError> {
        if a >= sys.n_dof() || a >= self.index_map.len() {
            return Err(ReanalysisError::OutOfRange { dof: a, n_dof: sys.n_dof() });
        }
        if self.index_map[a].is_some() {
            return Err(ReanalysisError::AlreadyActive(a));
        }
        Ok(())
    }

    /// Position of `a` in the sorted active list after insertion.
    fn insertion_point(&self, a: usize) -> usize {
        self.active.partition_point(|&d| d < a)
    }

    pub fn add_current(&self, sys: &LinearSystem, a: usize) -> Result<Perturbed, ReanalysisError> {
        let (x, _, c) = self.addition_terms(sys, a)?;
        Ok(self.assemble_addition(a, &x, c))
    }

    fn assemble_addition(&self, a: usize, x: &DVector<C64>, c: C64) -> Perturbed {
        let pos = self.insertion_point(a);
        let mut dofs = Vec::with_capacity(self.len() + 1);
        let mut current = DVector::zeros(self.len() + 1);
        for k in 0..=self.len() {
            match k.cmp(&pos) {
                Ordering::Less => {
                    dofs.push(self.active[k]);
                    current[k] = self.i[k] - c * x[k];
                }
                Ordering::Equal => {
                    dofs.push(a);
                    current[k] = c;
                }
                Ordering::Greater => {
                    dofs.push(self.active[k - 1]);
                    current[k] = self.i[k - 1] - c * x[k - 1];
                }
            }
        }
        Perturbed { dofs, current }
    }

    /// Removes `r` with a symmetric rank-1 downdate of `Y`.
    pub fn commit_remove(&mut self, sys: &LinearSystem, r: usize) -> Result<(), ReanalysisError> {
        if self.len() == 1 {
            return Err(ReanalysisError::Empty);
        }
        let next = self.remove_current(r)?;
        let lr = self.local_index(r).expect("checked by remove_current");
        let pivot = self.y[(lr, lr)];
        let y = self.y.column(lr).into_owned();
        let m = self.len();
        let keep: Vec<usize> = (0..m).filter(|&k| k != lr).collect();
        self.y = DMatrix::from_fn(m - 1, m - 1, |i, j| {
            let (p, q) = (keep[i], keep[j]);
            self.y[(p, q)] - y[p] * y[q] / pivot
        });
        self.v = DVector::from_iterator(m - 1, keep.iter().map(|&k| self.v[k]));
        self.i = next.current;
        self.index_map[r] = None;
        self.active = next.dofs;
        self.reindex();
        self.after_commit(sys)
    }

    /// Adds `a` by a bordered expansion of `Y` scaled by `1/s`.
    pub fn commit_add(&mut self, sys: &LinearSystem, a: usize) -> Result<(), ReanalysisError> {
        let (x, s, c) = self.addition_terms(sys, a)?;
        let next = self.assemble_addition(a, &x, c);
        let pos = self.insertion_point(a);
        let m = self.len();
        // old local index of new position k, or None for the inserted row
        let old = |k: usize| match k.cmp(&pos) {
            Ordering::Less => Some(k),
            Ordering::Equal => None,
            Ordering::Greater => Some(k - 1),
        };
        let inv = C64::new(1.0, 0.0) / s;
        self.y = DMatrix::from_fn(m + 1, m + 1, |i, j| match (old(i), old(j)) {
            (Some(p), Some(q)) => self.y[(p, q)] + x[p] * x[q] * inv,
            (Some(p), None) | (None, Some(p)) => -x[p] * inv,
            (None, None) => inv,
        });
        self.v = DVector::from_fn(m + 1, |k, _| match old(k) {
            Some(p) => self.v[p],
            None => sys.v[a],
        });
        self.i = next.current;
        self.active = next.dofs;
        self.reindex();
        self.after_commit(sys)
    }

    fn reindex(&mut self) {
        for (k, &d) in self.active.iter().enumerate() {
            self.index_map[d] = Some(k);
        }
    }

    /// Cheap drift estimate after a commit: the solution residual plus one
    /// rotating column of `Y·Z_G − Id`, both O(M²). Rebuilds `Y` when it
    /// exceeds [`DRIFT_TOL`].
    fn after_commit(&mut self, sys: &LinearSystem) -> Result<(), ReanalysisError> {
        self.commits += 1;
        self.y_norm = self.y.norm();
        if self.drift(sys) > DRIFT_TOL {
            self.refactors += 1;
            self.factorize(sys)?;
        }
        Ok(())
    }

    pub fn drift(&mut self, sys: &LinearSystem) -> f64 {
        let m = self.len();
        let zg = truncate_operator(&sys.z, &self.active);
        let vn = self.v.norm();
        let sol = if vn > 0.0 { (&zg * &self.i - &self.v).norm() / vn } else { 0.0 };
        self.probe = (self.probe + 1) % m;
        let mut col = &zg * self.y.column(self.probe);
        col[self.probe] -= C64::new(1.0, 0.0);
        sol.max(col.norm())
    }

    /// Evaluates every removal in `R` and addition in `A` (empty slices disable
    /// a class).
    pub fn candidates<'a>(
        &'a self,
        sys: &'a LinearSystem,
        removable: &[usize],
        addable: &[usize],
    ) -> CandidateBatch<'a> {
        CandidateBatch::new(self, sys, removable, addable)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CandidateStatus {
    Valid,
    DegeneratePivot,
    DegenerateSchur,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub dof: usize,
    pub action: Action,
    pub status: CandidateStatus,
}

/// All Hamming-distance-1 neighbours of a state with the shared products
/// needed to evaluate linear and quadratic forms on them in bulk.
///
/// Candidates are ordered removals first, each class by ascending DOF.
pub struct CandidateBatch<'a> {
    state: &'a ReanalysisState,
    sys: &'a LinearSystem,
    candidates: Vec<Candidate>,
    /// Local row and coefficient `I_r / Y_rr` per removal.
    removals: Vec<(usize, C64)>,
    /// Coefficient `i_a` per addition.
    additions: Vec<C64>,
    /// Columns `x_a = Y z_a`.
    x: DMatrix<C64>,
}

impl<'a> CandidateBatch<'a> {
    fn new(state: &'a ReanalysisState, sys: &'a LinearSystem, removable: &[usize], addable: &[usize]) -> Self {
        let mut candidates = Vec::with_capacity(removable.len() + addable.len());
        let mut removals = Vec::with_capacity(removable.len());
        let mut rem: Vec<usize> = removable.to_vec();
        rem.sort_unstable();
        let mut add: Vec<usize> = addable.to_vec();
        add.sort_unstable();
        for &r in &rem {
            match state.removal_coefficient(r) {
                Ok((lr, c)) => {
                    removals.push((lr, c));
                    candidates.push(Candidate { dof: r, action: Action::Remove, status: CandidateStatus::Valid });
                }
                Err(_) => {
                    let lr = state.local_index(r).expect("removable DOF must be active");
                    removals.push((lr, C64::new(f64::NAN, f64::NAN)));
                    candidates.push(Candidate {
                        dof: r,
                        action: Action::Remove,
                        status: CandidateStatus::DegeneratePivot,
                    });
                }
            }
        }

        let m = state.len();
        let za = DMatrix::from_fn(m, add.len(), |i, j| sys.z[(state.active[i], add[j])]);
        let x = cgemm(&state.y, &za);
        let mut additions = Vec::with_capacity(add.len());
        for (j, &a) in add.iter().enumerate() {
            assert!(state.local_index(a).is_none(), "addable DOF {a} is active");
            let zcol = za.column(j);
            let zaa = sys.z[(a, a)];
            let s = zaa - zcol.dot(&x.column(j));
            let status = if s.norm() < PIVOT_TOL * zaa.norm() || s.norm() == 0.0 {
                additions.push(C64::new(f64::NAN, f64::NAN));
                CandidateStatus::DegenerateSchur
            } else {
                additions.push((sys.v[a] - zcol.dot(&state.i)) / s);
                CandidateStatus::Valid
            };
            candidates.push(Candidate { dof: a, action: Action::Add, status });
        }
        Self { state, sys, candidates, removals, additions, x }
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn state(&self) -> &ReanalysisState {
        self.state
    }

    fn n_removals(&self) -> usize {
        self.removals.len()
    }

    /// Perturbed current of candidate `idx`; `None` when degenerate.
    pub fn current(&self, idx: usize) -> Option<Perturbed> {
        let cand = self.candidates[idx];
        if cand.status != CandidateStatus::Valid {
            return None;
        }
        let st = self.state;
        Some(match cand.action {
            Action::Remove => {
                let (lr, c) = self.removals[idx];
                let y = st.y.column(lr);
                Perturbed {
                    dofs: st.active.iter().copied().filter(|&d| d != cand.dof).collect(),
                    current: DVector::from_iterator(
                        st.len() - 1,
                        (0..st.len()).filter(|&k| k != lr).map(|k| st.i[k] - c * y[k]),
                    ),
                }
            }
            Action::Add => {
                let j = idx - self.n_removals();
                st.assemble_addition(cand.dof, &self.x.column(j).into_owned(), self.additions[j])
            }
        })
    }

    /// `f·J` for every candidate current `J`, with `f` over all DOFs.
    /// Degenerate candidates give NaN.
    pub fn linear_forms(&self, f: &DVector<C64>) -> Vec<C64> {
        let st = self.state;
        let fg = DVector::from_iterator(st.len(), st.active.iter().map(|&d| f[d]));
        let f0 = fg.dot(&st.i);
        // uᵀ = f_Gᵀ Y, so f_Gᵀ y_r = u_r and f_Gᵀ x_a = uᵀ z_a
        let u = st.y.tr_mul(&fg);
        let mut out = Vec::with_capacity(self.len());
        for &(lr, c) in &self.removals {
            out.push(f0 - c * u[lr]);
        }
        let fx = u.tr_mul(&self.z_block()).transpose();
        for (j, &c) in self.additions.iter().enumerate() {
            let a = self.candidates[self.n_removals() + j].dof;
            out.push(f0 - c * fx[j] + c * f[a]);
        }
        out
    }

    fn z_block(&self) -> DMatrix<C64> {
        let st = self.state;
        let add: Vec<usize> = self.candidates[self.n_removals()..].iter().map(|c| c.dof).collect();
        DMatrix::from_fn(st.len(), add.len(), |i, j| self.sys.z[(st.active[i], add[j])])
    }

    /// `JᴴAJ` for every candidate current with `A` real symmetric over all DOFs.
    pub fn quadratic_forms(&self, a: &DMatrix<f64>) -> Vec<f64> {
        let st = self.state;
        let ag = truncate_operator(a, &st.active);
        let ai = rcmul_vec(&ag, &st.i);
        let q0 = st.i.dotc(&ai).re;
        let mut out = Vec::with_capacity(self.len());

        let cols: Vec<usize> = self.removals.iter().map(|r| r.0).collect();
        let yr = DMatrix::from_fn(st.len(), cols.len(), |i, j| st.y[(i, cols[j])]);
        let p = rcgemm(&ag, &yr);
        for (j, &(_, c)) in self.removals.iter().enumerate() {
            let y = yr.column(j);
            let u = ai.dotc(&y);
            let d = y.dotc(&p.column(j)).re;
            out.push(q0 - 2.0 * (c * u).re + c.norm_sqr() * d);
        }

        let px = rcgemm(&ag, &self.x);
        for (j, &c) in self.additions.iter().enumerate() {
            let dof = self.candidates[self.n_removals() + j].dof;
            let x = self.x.column(j);
            let alpha = DVector::from_iterator(st.len(), st.active.iter().map(|&d| a[(d, dof)]));
            let jaj = q0 - 2.0 * (c * ai.dotc(&x)).re + c.norm_sqr() * x.dotc(&px.column(j)).re;
            let alpha_j = alpha.map(|v| C64::new(v, 0.0)).dot(&(&st.i - x * c));
            out.push(jaj + 2.0 * (c.conj() * alpha_j).re + c.norm_sqr() * a[(dof, dof)]);
        }
        out
    }

    /// Entry of every candidate current at global DOF `dof` (zero where inactive).
    pub fn entries(&self, dof: usize) -> Vec<C64> {
        let st = self.state;
        let loc = st.local_index(dof);
        let mut out = Vec::with_capacity(self.len());
        for (idx, &(lr, c)) in self.removals.iter().enumerate() {
            let cand = self.candidates[idx];
            out.push(match loc {
                _ if cand.dof == dof => C64::new(0.0, 0.0),
                Some(k) => st.i[k] - c * st.y[(k, lr)],
                None => C64::new(0.0, 0.0),
            });
        }
        for (j, &c) in self.additions.iter().enumerate() {
            let cand = self.candidates[self.n_removals() + j];
            out.push(match loc {
                _ if cand.dof == dof => c,
                Some(k) => st.i[k] - c * self.x[(k, j)],
                None => C64::new(0.0, 0.0),
            });
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensitivityEntry {
    pub dof: usize,
    pub action: Action,
    /// `f(g_{i+1}) − f(g_i)`; `None` for degenerate or unevaluable candidates.
    pub tau: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityMap {
    pub entries: Vec<SensitivityEntry>,
    pub objective_current: f64,
}

impl SensitivityMap {
    /// Most negative τ; ties within [`TIE_TOL`] go to the lowest DOF with
    /// removals first. `None` when no entry is negative.
    pub fn best(&self) -> Option<SensitivityEntry> {
        let min = self.entries.iter().filter_map(|e| e.tau).filter(|t| !t.is_nan()).fold(f64::INFINITY, f64::min);
        if !(min < 0.0) {
            return None;
        }
        let cut = min + TIE_TOL * min.abs();
        self.entries
            .iter()
            .filter(|e| e.tau.is_some_and(|t| t <= cut))
            .min_by_key(|e| (e.dof, e.action))
            .copied()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("dof,action,tau\n");
        for e in &self.entries {
            let tau = e.tau.map_or_else(|| "nan".to_string(), |t| format!("{t:e}"));
            s.push_str(&format!("{},{},{}\n", e.dof, e.action.as_str(), tau));
        }
        s
    }
}

/// τ for every candidate of `state`.
pub fn sweep_sensitivity(
    state: &ReanalysisState,
    sys: &LinearSystem,
    objective: &dyn Objective,
    removable: &[usize],
    addable: &[usize],
) -> Result<SensitivityMap, MetricError> {
    let f0 = objective.evaluate(state.active(), state.current())?;
    let batch = state.candidates(sys, removable, addable);
    let values = objective.evaluate_batch(&batch);
    let entries = batch
        .candidates()
        .iter()
        .zip(values)
        .map(|(c, v)| SensitivityEntry {
            dof: c.dof,
            action: c.action,
            tau: match (c.status, v) {
                (CandidateStatus::Valid, Ok(f)) if !f.is_nan() => Some(f - f0),
                _ => None,
            },
        })
        .collect();
    Ok(SensitivityMap { entries, objective_current: f0 })
}

/// Gathers the rows and columns `idx` of `a`, i.e. `Cᵀ A C`.
pub fn truncate_operator<T: nalgebra::Scalar + Copy>(a: &DMatrix<T>, idx: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])])
}

fn norm1(a: &DMatrix<C64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|x| x.norm()).sum::<f64>()).fold(0.0, f64::max)
}

fn split(a: &DMatrix<C64>) -> (DMatrix<f64>, DMatrix<f64>) {
    (a.map(|c| c.re), a.map(|c| c.im))
}

fn join(re: &DMatrix<f64>, im: &DMatrix<f64>) -> DMatrix<C64> {
    re.zip_map(im, C64::new)
}

/// Complex product through four real GEMMs.
pub(crate) fn cgemm(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    join(&re, &im)
}

/// Real matrix times complex matrix.
pub(crate) fn rcgemm(a: &DMatrix<f64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let (br, bi) = split(b);
    join(&(a * br), &(a * bi))
}

fn rcmul_vec(a: &DMatrix<f64>, v: &DVector<C64>) -> DVector<C64> {
    let re = a * v.map(|c| c.re);
    let im = a * v.map(|c| c.im);
    re.zip_map(&im, C64::new)
}

/// Candidate values one at a time through [`CandidateBatch::current`].
pub fn evaluate_each(
    batch: &CandidateBatch<'_>,
    f: impl Fn(&[usize], &DVector<C64>) -> Result<f64, MetricError> + Sync,
) -> Vec<Result<f64, MetricError>> {
    (0..batch.len())
        .into_par_iter()
        .map(|idx| match batch.current(idx) {
            Some(p) => f(&p.dofs, &p.current),
            None => Err(MetricError::Degenerate),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_system(n: usize, seed: u64) -> LinearSystem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = DMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        z = (&z + z.transpose()) * C64::new(0.5, 0.0);
        for i in 0..n {
            z[(i, i)] += C64::new(n as f64, 0.0);
        }
        let v = DVector::from_fn(n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        LinearSystem::new(z, v).unwrap()
    }

    fn rel(a: &DVector<C64>, b: &DVector<C64>) -> f64 {
        (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn scalar_state() {
        let sys = LinearSystem::new(
            DMatrix::from_element(1, 1, C64::new(2.0, 1.0)),
            DVector::from_element(1, C64::new(1.0, 0.0)),
        )
        .unwrap();
        let st = ReanalysisState::new(&sys, &[0]).unwrap();
        assert!((st.admittance()[(0, 0)] - C64::new(2.0, 1.0).inv()).norm() < 1e-15);
        assert!((st.current()[0] - C64::new(2.0, 1.0).inv()).norm() < 1e-15);
    }

    #[test]
    fn full_gene_matches_direct_solve() {
        let sys = random_system(6, 1);
        let st = ReanalysisState::new(&sys, &[0, 1, 2, 3, 4, 5]).unwrap();
        let direct = sys.z.clone().lu().solve(&sys.v).unwrap();
        assert!(rel(st.current(), &direct) < 1e-12);
    }

    #[test]
    fn removal_matches_truncated_solve() {
        let sys = random_system(8, 2);
        let st = ReanalysisState::new(&sys, &(0..8).collect::<Vec<_>>()).unwrap();
        for r in 0..8 {
            let p = st.remove_current(r).unwrap();
            assert!(!p.dofs.contains(&r));
            let direct = sys.solve_truncated(&p.dofs).unwrap();
            assert!(rel(&p.current, &direct) < 1e-10);
        }
    }

    #[test]
    fn addition_matches_extended_solve() {
        let sys = random_system(9, 3);
        let st = ReanalysisState::new(&sys, &[0, 2, 3, 5, 6, 7, 8, 1]).unwrap();
        let p = st.add_current(&sys, 4).unwrap();
        assert_eq!(p.dofs, (0..9).collect::<Vec<_>>());
        let direct = sys.solve_truncated(&p.dofs).unwrap();
        assert!(rel(&p.current, &direct) < 1e-10);
    }

    #[test]
    fn zero_current_removal_keeps_rest() {
        let mut sys = random_system(4, 4);
        for i in 0..4 {
            if i != 2 {
                sys.z[(2, i)] = C64::new(0.0, 0.0);
                sys.z[(i, 2)] = C64::new(0.0, 0.0);
            }
        }
        sys.v[2] = C64::new(0.0, 0.0);
        let st = ReanalysisState::new(&sys, &[0, 1, 2, 3]).unwrap();
        let p = st.remove_current(2).unwrap();
        let expect = DVector::from_vec(vec![st.current()[0], st.current()[1], st.current()[3]]);
        assert!(rel(&p.current, &expect) < 1e-14);
    }

    #[test]
    fn decoupled_addition() {
        let mut sys = random_system(5, 5);
        for i in 0..4 {
            sys.z[(4, i)] = C64::new(0.0, 0.0);
            sys.z[(i, 4)] = C64::new(0.0, 0.0);
        }
        sys.v[4] = C64::new(0.0, 0.0);
        let mut st = ReanalysisState::new(&sys, &[0, 1, 2, 3]).unwrap();
        let before = st.current().clone();
        let p = st.add_current(&sys, 4).unwrap();
        assert_eq!(p.current.rows(0, 4).into_owned(), before);
        assert_eq!(p.current[4], C64::new(0.0, 0.0));
        st.commit_add(&sys, 4).unwrap();
        assert!((st.admittance()[(4, 4)] - sys.z[(4, 4)].inv()).norm() < 1e-15);
    }

    #[test]
    fn remove_then_add_round_trip() {
        let sys = random_system(7, 6);
        let mut st = ReanalysisState::new(&sys, &(0..7).collect::<Vec<_>>()).unwrap();
        let orig = st.current().clone();
        st.commit_remove(&sys, 3).unwrap();
        let back = st.add_current(&sys, 3).unwrap();
        assert!(rel(&back.current, &orig) < 1e-9);
    }

    #[test]
    fn commits_match_from_scratch() {
        let sys = random_system(12, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut st = ReanalysisState::new(&sys, &[0, 1, 2, 3, 4, 5]).unwrap();
        for _ in 0..30 {
            let add = rng.random_bool(0.5) || st.len() < 3;
            let predicted;
            if add && st.len() < 12 {
                let free: Vec<usize> = (0..12).filter(|d| st.local_index(*d).is_none()).collect();
                let a = free[rng.random_range(0..free.len())];
                predicted = st.add_current(&sys, a).unwrap();
                st.commit_add(&sys, a).unwrap();
            } else {
                let r = st.active()[rng.random_range(0..st.len())];
                predicted = st.remove_current(r).unwrap();
                st.commit_remove(&sys, r).unwrap();
            }
            assert_eq!(predicted.dofs, st.active());
            if st.refactors() == 0 {
                assert_eq!(&predicted.current, st.current());
            }
            let fresh = ReanalysisState::new(&sys, st.active()).unwrap();
            assert!((st.admittance() - fresh.admittance()).norm() <= 1e-8 * fresh.admittance().norm());
            assert!(st.inverse_residual(&sys) <= 1e-7);
        }
    }

    #[test]
    fn batch_matches_explicit_currents() {
        let sys = random_system(10, 9);
        let st = ReanalysisState::new(&sys, &[0, 2, 3, 4, 7, 9]).unwrap();
        let batch = st.candidates(&sys, &[2, 3, 9], &[1, 5, 6, 8]);
        let f = DVector::from_fn(10, |i, _| C64::new((i as f64).sin(), (i as f64 * 0.3).cos()));
        let a = DMatrix::from_fn(10, 10, |i, j| ((i + j) as f64 * 0.37).cos() + if i == j { 3.0 } else { 0.0 });
        let lin = batch.linear_forms(&f);
        let quad = batch.quadratic_forms(&a);
        let at5 = batch.entries(5);
        for idx in 0..batch.len() {
            let p = batch.current(idx).unwrap();
            let mut full = DVector::zeros(10);
            for (k, &d) in p.dofs.iter().enumerate() {
                full[d] = p.current[k];
            }
            let l = f.dot(&full);
            let ac = a.map(|v| C64::new(v, 0.0));
            let q = full.dotc(&(&ac * &full)).re;
            assert!((lin[idx] - l).norm() < 1e-12 * l.norm().max(1.0));
            assert!((quad[idx] - q).abs() < 1e-12 * q.abs().max(1.0));
            assert!((at5[idx] - full[5]).norm() < 1e-14);
        }
    }

    #[test]
    fn truncation_is_gather() {
        let a = DMatrix::from_fn(6, 6, |i, j| (i * 6 + j) as f64);
        assert_eq!(truncate_operator(&a, &[0, 1, 2, 3, 4, 5]), a);
        let idx = [1, 4, 5];
        let mut c = DMatrix::zeros(6, 3);
        for (k, &i) in idx.iter().enumerate() {
            c[(i, k)] = 1.0;
        }
        assert_eq!(truncate_operator(&a, &idx), c.transpose() * &a * &c);
    }

    #[test]
    fn ties_prefer_low_dof_and_removal() {
        let map = SensitivityMap {
            entries: vec![
                SensitivityEntry { dof: 4, action: Action::Add, tau: Some(-1.0) },
                SensitivityEntry { dof: 4, action: Action::Remove, tau: Some(-1.0) },
                SensitivityEntry { dof: 7, action: Action::Remove, tau: Some(-1.0) },
                SensitivityEntry { dof: 1, action: Action::Remove, tau: Some(-0.5) },
                SensitivityEntry { dof: 2, action: Action::Remove, tau: None },
            ],
            objective_current: 0.0,
        };
        assert_eq!(map.best().unwrap(), SensitivityEntry { dof: 4, action: Action::Remove, tau: Some(-1.0) });
        let none = SensitivityMap { entries: vec![SensitivityEntry { dof: 0, action: Action::Add, tau: Some(0.0) }], objective_current: 1.0 };
        assert!(none.best().is_none());
    }
}
