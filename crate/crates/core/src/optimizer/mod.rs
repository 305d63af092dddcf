//! Memetic search: every agent is greedily descended, then a genetic step
//! (tournament, crossover, mutation, elitist merge) proposes the next generation.

pub mod ga;
pub mod local;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::Objective;
use crate::reanalysis::LinearSystem;
use crate::shapes::Gene;

pub use ga::{crossover, elitist_merge, init_population, mutate, tournament_select, Agent};
pub use local::{evaluate_gene, local_descent, Descent, DescentStep, LocalStop};

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("every agent failed; first error: {0}")]
    AllAgentsFailed(String),
    #[error("gene parameterization does not match the system (N_dof {gene} vs {system})")]
    Dimension { gene: usize, system: usize },
}

/// Which genes are locally descended after each genetic step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescentScope {
    /// Descend the generation that survives the merge.
    #[default]
    Survivors,
    /// Descend every offspring before the merge.
    Offspring,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemeticConfig {
    pub i_max: usize,
    pub eps_loc: f64,
    pub j_max: usize,
    pub eps_glob: f64,
    pub n_agents: usize,
    pub p_c: f64,
    pub p_m: f64,
    pub c_bnd: f64,
    pub removals: bool,
    pub additions: bool,
    pub seed: u64,
    pub descent_scope: DescentScope,
    /// Bits flipped by one mutation.
    pub mutation_bits: usize,
}

impl Default for MemeticConfig {
    fn default() -> Self {
        Self {
            i_max: 10_000,
            eps_loc: 0.0,
            j_max: 50,
            eps_glob: 1e-3,
            n_agents: 10,
            p_c: 1.0,
            p_m: 1.0,
            c_bnd: 1.0,
            removals: true,
            additions: true,
            seed: 0,
            descent_scope: DescentScope::Survivors,
            mutation_bits: 1,
        }
    }
}

impl MemeticConfig {
    /// Every violated constraint, one message per key.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (k, p) in [("p_c", self.p_c), ("p_m", self.p_m)] {
            if !(0.0..=1.0).contains(&p) {
                out.push(format!("{k} must lie in [0, 1], got {p}"));
            }
        }
        if self.n_agents < 2 {
            out.push(format!("n_agents must be at least 2, got {}", self.n_agents));
        }
        if !(self.c_bnd >= 1.0) {
            out.push(format!("c_bnd must be at least 1, got {}", self.c_bnd));
        }
        for (k, e) in [("eps_loc", self.eps_loc), ("eps_glob", self.eps_glob)] {
            if !(e >= 0.0 && e.is_finite()) {
                out.push(format!("{k} must be finite and non-negative, got {e}"));
            }
        }
        if self.mutation_bits == 0 {
            out.push("mutation_bits must be at least 1".into());
        }
        if !self.removals && !self.additions {
            out.push("removals and additions cannot both be disabled".into());
        }
        out
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(OptimizerError::Config(p))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// `f / f_bound < c_bnd`.
    Bound,
    /// Relative change of the worst agent below `eps_glob`.
    GlobalStagnation,
    /// `j_max` generations were run.
    MaxIterations,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Bound => "bound",
            Termination::GlobalStagnation => "eps_glob",
            Termination::MaxIterations => "max_iterations",
        }
    }
}

/// One row of the convergence trace: local iteration `i` of agent `agent` in
/// generation `j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub j: usize,
    pub i: usize,
    pub agent: usize,
    pub f: f64,
    pub q: Option<f64>,
    pub active_dofs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GenerationStats {
    pub j: usize,
    pub best: f64,
    pub worst: f64,
    pub mean: f64,
}

#[derive(Clone, Debug)]
pub struct MemeticResult {
    pub best: Agent,
    pub best_q: Option<f64>,
    pub termination: Termination,
    pub generations: usize,
    pub population: Vec<Agent>,
    pub trace: Vec<TraceRow>,
    pub stats: Vec<GenerationStats>,
}

impl MemeticResult {
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("j,i,agent,f,q,active_dofs\n");
        for r in &self.trace {
            let q = r.q.map_or_else(String::new, |q| format!("{q:e}"));
            s.push_str(&format!("{},{},{},{:e},{},{}\n", r.j, r.i, r.agent, r.f, q, r.active_dofs));
        }
        s
    }
}

fn stats(j: usize, agents: &[Agent]) -> GenerationStats {
    let best = agents.iter().map(|a| a.f).fold(f64::INFINITY, f64::min);
    let worst = agents.iter().map(|a| a.f).fold(f64::NEG_INFINITY, f64::max);
    let mean = agents.iter().map(|a| a.f).sum::<f64>() / agents.len() as f64;
    GenerationStats { j, best, worst, mean }
}

struct Runner<'a> {
    sys: &'a LinearSystem,
    objective: &'a dyn Objective,
    cfg: &'a MemeticConfig,
    bound: Option<f64>,
    trace: Vec<TraceRow>,
}

impl Runner<'_> {
    fn q(&self, f: f64) -> Option<f64> {
        self.bound.map(|b| f / b)
    }

    /// Descends every gene in parallel and records the local traces in order.
    fn descend(&mut self, j: usize, genes: &[Gene]) -> (Vec<Agent>, Option<String>) {
        let runs: Vec<Descent> =
            genes.par_iter().map(|g| local_descent(self.sys, self.objective, g, self.cfg)).collect();
        let mut first_error = None;
        let mut agents = Vec::with_capacity(runs.len());
        for (k, d) in runs.into_iter().enumerate() {
            for s in &d.trace {
                self.trace.push(TraceRow { j, i: s.i, agent: k, f: s.f, q: self.q(s.f), active_dofs: s.active_dofs });
            }
            if first_error.is_none() {
                first_error = d.error.clone();
            }
            agents.push(Agent { gene: d.gene, f: d.f });
        }
        (agents, first_error)
    }

    fn evaluate(&self, genes: Vec<Gene>) -> Vec<Agent> {
        genes
            .into_par_iter()
            .map(|g| {
                let f = evaluate_gene(self.sys, self.objective, &g);
                Agent { gene: g, f }
            })
            .collect()
    }
}

/// Runs the memetic loop from a random initial population with the fixed set
/// and size of `template`. `bound` enables the `c_bnd` criterion and `q` values.
pub fn memetic_run(
    sys: &LinearSystem,
    objective: &dyn Objective,
    template: &Gene,
    cfg: &MemeticConfig,
    bound: Option<f64>,
) -> Result<MemeticResult, OptimizerError> {
    cfg.validate()?;
    if template.n_dof() != sys.n_dof() {
        return Err(OptimizerError::Dimension { gene: template.n_dof(), system: sys.n_dof() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut run = Runner { sys, objective, cfg, bound: bound.filter(|b| *b > 0.0), trace: Vec::new() };

    let init = init_population(template, cfg.n_agents, &mut rng);
    let (mut agents, err) = run.descend(0, &init);
    agents.sort_by(|a, b| a.f.total_cmp(&b.f));
    if agents.iter().all(|a| a.f == f64::INFINITY) {
        return Err(OptimizerError::AllAgentsFailed(err.unwrap_or_default()));
    }
    let mut all_stats = vec![stats(0, &agents)];
    let mut j = 0;
    let termination = loop {
        if let Some(b) = run.bound {
            if agents[0].f / b < cfg.c_bnd {
                break Termination::Bound;
            }
        }
        if j >= cfg.j_max {
            break Termination::MaxIterations;
        }
        j += 1;
        let worst_before = agents.last().expect("non-empty").f;

        let pool = tournament_select(&agents, &mut rng);
        let kids: Vec<Gene> = crossover(&pool, cfg.p_c, &mut rng)
            .iter()
            .map(|g| mutate(g, cfg.p_m, cfg.mutation_bits, &mut rng))
            .collect();
        agents = match cfg.descent_scope {
            DescentScope::Offspring => {
                let (kids, _) = run.descend(j, &kids);
                elitist_merge(agents, kids, cfg.n_agents)
            }
            DescentScope::Survivors => {
                let kids = run.evaluate(kids);
                let mut merged = elitist_merge(agents.clone(), kids, cfg.n_agents);
                // only genes new to this generation need a descent
                let fresh: Vec<usize> =
                    (0..merged.len()).filter(|&k| !agents.iter().any(|a| a.gene == merged[k].gene)).collect();
                let genes: Vec<Gene> = fresh.iter().map(|&k| merged[k].gene.clone()).collect();
                let (descended, _) = run.descend(j, &genes);
                for (k, a) in fresh.into_iter().zip(descended) {
                    merged[k] = a;
                }
                merged.sort_by(|a, b| a.f.total_cmp(&b.f));
                merged
            }
        };
        all_stats.push(stats(j, &agents));

        let worst_after = agents.last().expect("non-empty").f;
        if worst_before.is_finite() && worst_after.is_finite() {
            let rel = (worst_before - worst_after) / worst_before.abs().max(f64::MIN_POSITIVE);
            if rel < cfg.eps_glob {
                if let Some(b) = run.bound {
                    if agents[0].f / b < cfg.c_bnd {
                        break Termination::Bound;
                    }
                }
                break Termination::GlobalStagnation;
            }
        }
    };
    let best = agents[0].clone();
    Ok(MemeticResult {
        best_q: run.q(best.f),
        best,
        termination,
        generations: j,
        population: agents,
        trace: run.trace,
        stats: all_stats,
    })
}
