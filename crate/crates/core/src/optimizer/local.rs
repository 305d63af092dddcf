//! Greedy descent: commit the most negative topology sensitivity until none is
//! left or a local stopping rule fires.

use serde::Serialize;

use crate::metrics::{MetricError, Objective};
use crate::reanalysis::{sweep_sensitivity, Action, LinearSystem, ReanalysisError, ReanalysisState};
use crate::shapes::{derive_sets, Gene};

use super::MemeticConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalStop {
    /// Every τ is non-negative.
    LocalMinimum,
    /// Relative improvement fell below `eps_loc`.
    Stagnation,
    /// `i_max` commits were made.
    MaxIterations,
    /// The starting gene could not be solved or evaluated.
    Failed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DescentStep {
    pub i: usize,
    pub f: f64,
    pub active_dofs: usize,
}

#[derive(Clone, Debug)]
pub struct Descent {
    pub gene: Gene,
    pub f: f64,
    /// Objective after each commit, starting with the initial gene at `i = 0`.
    pub trace: Vec<DescentStep>,
    pub stop: LocalStop,
    pub error: Option<String>,
}

fn failed(gene: &Gene, e: impl ToString) -> Descent {
    Descent {
        gene: gene.clone(),
        f: f64::INFINITY,
        trace: vec![DescentStep { i: 0, f: f64::INFINITY, active_dofs: gene.active_dofs().len() }],
        stop: LocalStop::Failed,
        error: Some(e.to_string()),
    }
}

/// Objective of `gene` by a direct solve; `+∞` when singular or unevaluable.
pub fn evaluate_gene(sys: &LinearSystem, objective: &dyn Objective, gene: &Gene) -> f64 {
    let eval = || -> Result<f64, String> {
        let st = ReanalysisState::from_gene(sys, gene).map_err(|e| e.to_string())?;
        objective.evaluate(st.active(), st.current()).map_err(|e| e.to_string())
    };
    eval().unwrap_or(f64::INFINITY)
}

pub fn local_descent(sys: &LinearSystem, objective: &dyn Objective, gene: &Gene, cfg: &MemeticConfig) -> Descent {
    let mut state = match ReanalysisState::from_gene(sys, gene) {
        Ok(s) => s,
        Err(e) => return failed(gene, e),
    };
    let mut f = match objective.evaluate(state.active(), state.current()) {
        Ok(f) if !f.is_nan() => f,
        Ok(_) => return failed(gene, MetricError::Degenerate),
        Err(e) => return failed(gene, e),
    };
    let mut gene = gene.clone();
    let mut trace = vec![DescentStep { i: 0, f, active_dofs: state.len() }];
    let mut i = 0;
    let stop = loop {
        if i >= cfg.i_max {
            break LocalStop::MaxIterations;
        }
        let sets = derive_sets(&gene, None).expect("gene is valid");
        let removable = if cfg.removals { sets.removable } else { Vec::new() };
        let addable = if cfg.additions { sets.addable } else { Vec::new() };
        let map = match sweep_sensitivity(&state, sys, objective, &removable, &addable) {
            Ok(m) => m,
            Err(_) => break LocalStop::LocalMinimum,
        };
        let Some(best) = map.best() else {
            break LocalStop::LocalMinimum;
        };
        let committed: Result<(), ReanalysisError> = match best.action {
            Action::Remove => state.commit_remove(sys, best.dof),
            Action::Add => state.commit_add(sys, best.dof),
        };
        if committed.is_err() {
            break LocalStop::LocalMinimum;
        }
        gene.flip(gene.bit_of(best.dof).expect("fixed DOFs are never candidates"));
        i += 1;
        let next = objective
            .evaluate(state.active(), state.current())
            .unwrap_or_else(|_| f + best.tau.expect("best has a value"));
        let improvement = (f - next) / f.abs().max(f64::MIN_POSITIVE);
        f = next;
        trace.push(DescentStep { i, f, active_dofs: state.len() });
        if improvement < cfg.eps_loc {
            break LocalStop::Stagnation;
        }
    };
    Descent { gene, f, trace, stop, error: None }
}
