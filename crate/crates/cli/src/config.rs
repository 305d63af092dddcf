//! TOML run configuration.
//!
//! ```toml
//! seed = 1
//! n_agents = 10
//! j_max = 50
//! eps_glob = 1e-3
//! c_bnd = 1.4
//! normalize = true
//! fixed_dofs = [160]
//!
//! [objective]
//! terms = [
//!   { kind = "q_untuned", weight = 1.0 },
//!   { kind = "q_matching", weight = 0.5 },
//! ]
//! ```

use momtopo::metrics::ObjectiveSpec;
use momtopo::optimizer::{DescentScope, MemeticConfig};
use serde::de::DeserializeOwned;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub memetic: MemeticConfig,
    pub objective: ObjectiveSpec,
    /// Fixed DOFs; the delta-gap edges of the operator file when absent.
    pub fixed_dofs: Option<Vec<usize>>,
    /// Must be one of the container's delta-gap edges; always fixed.
    pub gap_dof: Option<usize>,
    /// Divide the objective by `Q_lb`.
    pub normalize: bool,
    /// Compute `Q_lb` for the `c_bnd` criterion and `q` columns.
    pub bound: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            memetic: MemeticConfig::default(),
            objective: default_objective(),
            fixed_dofs: None,
            gap_dof: None,
            normalize: false,
            bound: true,
        }
    }
}

/// Tuned Q: `Q_U + Q_E / 2`.
pub fn default_objective() -> ObjectiveSpec {
    ObjectiveSpec::q_composite(1.0, 0.5)
}

const KEYS: &[&str] = &[
    "i_max",
    "eps_loc",
    "j_max",
    "eps_glob",
    "n_agents",
    "p_c",
    "p_m",
    "c_bnd",
    "removals",
    "additions",
    "seed",
    "descent_scope",
    "mutation_bits",
    "objective",
    "eval_domain",
    "fixed_dofs",
    "gap_dof",
    "normalize",
    "bound",
];

fn take<T: DeserializeOwned>(table: &toml::Table, key: &str, errs: &mut Vec<String>) -> Option<T> {
    let v = table.get(key)?;
    match v.clone().try_into::<T>() {
        Ok(t) => Some(t),
        Err(e) => {
            errs.push(format!("`{key}`: {}", e.to_string().trim()));
            None
        }
    }
}

/// Parses and validates a config, reporting every bad key at once.
pub fn parse(text: &str) -> Result<RunConfig, Vec<String>> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| vec![e.to_string().trim().to_string()])?;
    let mut errs = Vec::new();
    for k in table.keys() {
        if !KEYS.contains(&k.as_str()) {
            errs.push(format!("unknown key `{k}`"));
        }
    }
    let mut cfg = RunConfig::default();
    let m = &mut cfg.memetic;
    macro_rules! set {
        ($field:ident) => {
            if let Some(v) = take(&table, stringify!($field), &mut errs) {
                m.$field = v;
            }
        };
    }
    set!(i_max);
    set!(eps_loc);
    set!(j_max);
    set!(eps_glob);
    set!(n_agents);
    set!(p_c);
    set!(p_m);
    set!(c_bnd);
    set!(removals);
    set!(additions);
    set!(seed);
    set!(mutation_bits);
    if let Some(s) = take::<DescentScope>(&table, "descent_scope", &mut errs) {
        m.descent_scope = s;
    }
    errs.extend(cfg.memetic.problems().into_iter().map(|p| format!("`{}", p.replacen(' ', "`: ", 1))));

    if let Some(o) = take::<ObjectiveSpec>(&table, "objective", &mut errs) {
        cfg.objective = o;
    }
    if let Some(d) = take::<Vec<usize>>(&table, "eval_domain", &mut errs) {
        cfg.objective.eval_domain = Some(d);
    }
    if let Err(e) = cfg.objective.validate() {
        errs.push(format!("`objective`: {e}"));
    }
    cfg.fixed_dofs = take(&table, "fixed_dofs", &mut errs);
    cfg.gap_dof = take(&table, "gap_dof", &mut errs);
    if let Some(n) = take(&table, "normalize", &mut errs) {
        cfg.normalize = n;
    }
    if let Some(b) = take(&table, "bound", &mut errs) {
        cfg.bound = b;
    }
    if cfg.normalize && !cfg.bound {
        errs.push("`normalize`: requires `bound = true`".into());
    }
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(errs)
    }
}
