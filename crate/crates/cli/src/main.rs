//! `momtopo`: assemble operators, compute bounds, run and verify shape searches.

mod config;
mod error;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use momtopo::bounds::solve_bound;
use momtopo::metrics::{report, CompositeObjective, Objective};
use momtopo::operators::{
    build_mesh, load_operators, meshfile, save_operators, write_atomic, AssemblyConfig, ExcitationSpec, LumpedPort,
    OperatorSet, PlateSpec, Resistivity, Vec3,
};
use momtopo::optimizer::{memetic_run, MemeticResult};
use momtopo::reanalysis::{sweep_sensitivity, LinearSystem, ReanalysisState};
use momtopo::shapes::{derive_sets, Gene};
use serde_json::json;

use config::RunConfig;
use error::CliError;
use manifest::{FileHash, RunManifest};

#[derive(Parser)]
#[command(name = "momtopo", version, about = "MoM topology optimization of planar antennas")]
struct Cli {
    /// Cap on worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mesh a rectangular plate and write its operator container.
    Assemble(AssembleArgs),
    /// Lower bound on the Q-factor of any current on the plate.
    Bound(BoundArgs),
    /// Run the memetic search.
    Optimize(OptimizeArgs),
    /// Topology sensitivity map of one shape.
    Sensitivity(SensitivityArgs),
    /// Metrics of one shape.
    Eval(EvalArgs),
    /// Re-hash the inputs of a run and replay its first two generations.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct AssembleArgs {
    /// Plate size `LXxLY` in meters, e.g. `2x1`.
    #[arg(long, value_parser = parse_plate)]
    plate: (f64, f64),
    #[arg(long)]
    nx: usize,
    #[arg(long)]
    ny: usize,
    /// Electrical size `ka` with `a` the circumscribing radius.
    #[arg(long)]
    ka: f64,
    /// Delta-gap DOFs (default: the edge nearest the plate centre).
    #[arg(long, value_delimiter = ',')]
    gap: Vec<usize>,
    /// Uniform sheet resistivity in ohm per square.
    #[arg(long, default_value_t = 0.0)]
    resistivity: f64,
    /// Series RLC element `DOF:R:L:C` (C may be `inf`).
    #[arg(long = "port", value_parser = parse_port)]
    ports: Vec<LumpedPort>,
    #[arg(long)]
    l_max: Option<usize>,
    /// Relative frequency step of the stored-energy finite difference.
    #[arg(long, default_value_t = 1e-4)]
    delta: f64,
    /// Far-field row `dx,dy,dz:ex,ey,ez` (default: broadside x and y).
    #[arg(long = "far-field", value_parser = parse_direction)]
    far_field: Vec<(Vec3, Vec3)>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the mesh as a text file.
    #[arg(long)]
    mesh_out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    operators: PathBuf,
    /// Restrict currents to these DOFs.
    #[arg(long, value_delimiter = ',')]
    mask: Option<Vec<usize>>,
    /// JSON report path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optimal current as CSV `dof,re,im`.
    #[arg(long)]
    current_out: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    operators: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory receiving result.json, best.gene, trace.csv and manifest.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GeneArgs {
    operators: PathBuf,
    /// Gene file, or `ones` / `zeros`.
    #[arg(long)]
    gene: String,
    /// Run config supplying the objective and fixed DOFs.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SensitivityArgs {
    #[command(flatten)]
    input: GeneArgs,
    /// CSV `dof,action,tau`; a JSON sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    input: GeneArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Output directory of an `optimize` run.
    run_dir: PathBuf,
}

fn parse_plate(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or("expected LXxLY")?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok((p(a)?, p(b)?))
}

fn parse_port(s: &str) -> Result<LumpedPort, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 4 {
        return Err("expected DOF:R:L:C".into());
    }
    let f = |t: &str| t.parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok(LumpedPort {
        dof: parts[0].parse().map_err(|e| format!("`{}`: {e}", parts[0]))?,
        resistance: f(parts[1])?,
        inductance: f(parts[2])?,
        capacitance: f(parts[3])?,
    })
}

fn parse_direction(s: &str) -> Result<(Vec3, Vec3), String> {
    let (d, e) = s.split_once(':').ok_or("expected dx,dy,dz:ex,ey,ez")?;
    let v = |t: &str| -> Result<Vec3, String> {
        let x: Vec<f64> = t.split(',').map(|c| c.trim().parse::<f64>().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
        <[f64; 3]>::try_from(x).map_err(|_| "expected three components".to_string())
    };
    Ok((v(d)?, v(e)?))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(|e| CliError::io(path, e))
}

fn load(path: &Path) -> Result<OperatorSet, CliError> {
    load_operators(path).map_err(|source| CliError::Container { path: path.to_path_buf(), source })
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => config::parse(&read_text(p)?).map_err(CliError::Config),
        None => Ok(RunConfig::default()),
    }
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values serialize") + "\n"
}

fn emit(out: Option<&Path>, v: &serde_json::Value) -> Result<(), CliError> {
    match out {
        Some(p) => write(p, pretty(v).as_bytes()),
        None => {
            print!("{}", pretty(v));
            Ok(())
        }
    }
}

fn cmd_assemble(a: &AssembleArgs) -> Result<(), CliError> {
    let spec = PlateSpec { length_x: a.plate.0, length_y: a.plate.1, nx: a.nx, ny: a.ny, ka: a.ka };
    spec.validate().map_err(|e| CliError::config(e.to_string()))?;
    let t = Instant::now();
    let mesh = build_mesh(&spec).map_err(|e| CliError::config(e.to_string()))?;
    let mut cfg = AssemblyConfig::for_plate(&spec, &mesh);
    if !a.gap.is_empty() {
        cfg.excitation = ExcitationSpec::DeltaGap { dofs: a.gap.clone(), voltage: momtopo::C64::new(1.0, 0.0) };
    }
    cfg.excitation.validate(mesh.dof_count()).map_err(|e| CliError::config(e.to_string()))?;
    cfg.resistivity = Resistivity::Uniform(a.resistivity);
    cfg.ports = a.ports.clone();
    cfg.delta = a.delta;
    if let Some(l) = a.l_max {
        cfg.l_max = l;
    }
    if !a.far_field.is_empty() {
        cfg.farfield_dirs = a.far_field.clone();
    }
    let ops = OperatorSet::assemble(&mesh, &cfg).map_err(|e| CliError::config(e.to_string()))?;
    save_operators(&ops, &a.out).map_err(|source| CliError::Container { path: a.out.clone(), source })?;
    if let Some(p) = &a.mesh_out {
        write(p, meshfile::write_mesh(&mesh, &ops.gap_dofs, &ops.gap_dofs).as_bytes())?;
    }
    println!("N_dof = {}", ops.n_dof());
    println!("gap = {:?}", ops.gap_dofs);
    println!("assembly time = {:.3} s", t.elapsed().as_secs_f64());
    Ok(())
}

fn cmd_bound(a: &BoundArgs) -> Result<(), CliError> {
    let ops = load(&a.operators)?;
    let t = Instant::now();
    let b = solve_bound(&ops, a.mask.as_deref()).map_err(CliError::numerical)?;
    let report = json!({
        "q_lb": b.q_lb,
        "nu": b.nu,
        "iterations": b.iterations,
        "residuals": {
            "resonance": b.residuals.resonance,
            "normalization": b.residuals.normalization,
            "eigen": b.residuals.eigen,
        },
        "seconds": t.elapsed().as_secs_f64(),
    });
    emit(a.out.as_deref(), &report)?;
    if let Some(p) = &a.current_out {
        let mut s = String::from("dof,re,im\n");
        for (d, c) in b.optimal_current.iter().enumerate() {
            s.push_str(&format!("{d},{:e},{:e}\n", c.re, c.im));
        }
        write(p, s.as_bytes())?;
    }
    Ok(())
}

/// Fixed set from the config, defaulting to the delta-gap edges.
fn fixed_set(cfg: &RunConfig, ops: &OperatorSet) -> Result<Vec<usize>, CliError> {
    let mut fixed = cfg.fixed_dofs.clone().unwrap_or_else(|| ops.gap_dofs.clone());
    if let Some(g) = cfg.gap_dof {
        if !ops.gap_dofs.contains(&g) {
            return Err(CliError::config(format!(
                "`gap_dof`: {g} is not a delta-gap edge of the operator file ({:?})",
                ops.gap_dofs
            )));
        }
        fixed.push(g);
    }
    fixed.sort_unstable();
    fixed.dedup();
    Ok(fixed)
}

struct Prepared {
    ops: OperatorSet,
    sys: LinearSystem,
    objective: CompositeObjective,
    template: Gene,
    q_lb: Option<f64>,
}

fn prepare(operators: &Path, cfg: &RunConfig) -> Result<Prepared, CliError> {
    let ops = load(operators)?;
    let fixed = fixed_set(cfg, &ops)?;
    let template = Gene::zeros(ops.n_dof(), &fixed).map_err(|e| CliError::config(format!("`fixed_dofs`: {e}")))?;
    let q_lb = if cfg.bound { Some(solve_bound(&ops, None).map_err(CliError::numerical)?.q_lb) } else { None };
    let mut spec = cfg.objective.clone();
    if cfg.normalize {
        spec.normalization = q_lb;
    }
    let objective = spec.compile(&ops).map_err(|e| CliError::config(format!("`objective`: {e}")))?;
    let sys = LinearSystem::from_operators(&ops);
    Ok(Prepared { ops, sys, objective, template, q_lb })
}

/// Bound against which `f` is compared: 1 when `f` is already normalized.
fn run_bound(cfg: &RunConfig, q_lb: Option<f64>) -> Option<f64> {
    if cfg.normalize {
        Some(1.0)
    } else {
        q_lb
    }
}

fn run(operators: &Path, cfg: &RunConfig) -> Result<(Prepared, MemeticResult), CliError> {
    let p = prepare(operators, cfg)?;
    let r = memetic_run(&p.sys, &p.objective, &p.template, &cfg.memetic, run_bound(cfg, p.q_lb))
        .map_err(CliError::numerical)?;
    Ok((p, r))
}

fn cmd_optimize(a: &OptimizeArgs, threads: Option<usize>) -> Result<(), CliError> {
    let started = manifest::unix_now();
    let cfg = load_config(a.config.as_deref())?;
    let (p, r) = run(&a.operators, &cfg)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    let trace = a.out_dir.join("trace.csv");
    write(&trace, r.trace_csv().as_bytes())?;
    let result = a.out_dir.join("result.json");
    let body = json!({
        "best_gene": r.best.gene.to_text(),
        "f": r.best.f,
        "q": r.best_q,
        "q_lb": p.q_lb,
        "active_dofs": r.best.gene.active_dofs().len(),
        "termination": r.termination.as_str(),
        "generations": r.generations,
        "stats": r.stats,
    });
    write(&result, pretty(&body).as_bytes())?;
    let best = a.out_dir.join("best.gene");
    write(&best, r.best.gene.to_text().as_bytes())?;
    let m = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: "optimize".into(),
        config: a.config.as_deref().map(FileHash::of).transpose()?,
        operators: FileHash::of(&a.operators)?,
        seed: cfg.memetic.seed,
        threads,
        started_unix: started,
        finished_unix: manifest::unix_now(),
        termination: r.termination.as_str().into(),
        outputs: vec![FileHash::of(&result)?, FileHash::of(&best)?, FileHash::of(&trace)?],
    };
    let mpath = a.out_dir.join(manifest::FILE_NAME);
    write(&mpath, pretty(&serde_json::to_value(&m).expect("manifest serializes")).as_bytes())?;
    println!("best f = {} ({} active DOFs)", r.best.f, r.best.gene.active_dofs().len());
    if let Some(q) = r.best_q {
        println!("q = {q}");
    }
    println!("termination = {} after {} generations", r.termination.as_str(), r.generations);
    Ok(())
}

fn read_gene(arg: &str, template: &Gene) -> Result<Gene, CliError> {
    let gene = match arg {
        "zeros" => template.cleared(),
        "ones" => Gene::ones(template.n_dof(), template.fixed()).map_err(|e| CliError::config(e.to_string()))?,
        path => Gene::parse(&read_text(Path::new(path))?).map_err(|e| CliError::config(format!("gene: {e}")))?,
    };
    if gene.n_dof() != template.n_dof() {
        return Err(CliError::config(format!(
            "gene has N_dof = {} but the operator file has {}",
            gene.n_dof(),
            template.n_dof()
        )));
    }
    Ok(gene)
}

fn cmd_sensitivity(a: &SensitivityArgs) -> Result<(), CliError> {
    let cfg = load_config(a.input.config.as_deref())?;
    let p = prepare(&a.input.operators, &cfg)?;
    let gene = read_gene(&a.input.gene, &p.template)?;
    let state = ReanalysisState::from_gene(&p.sys, &gene).map_err(CliError::numerical)?;
    let sets = derive_sets(&gene, None).map_err(|e| CliError::config(e.to_string()))?;
    let removable = if cfg.memetic.removals { sets.removable } else { Vec::new() };
    let addable = if cfg.memetic.additions { sets.addable } else { Vec::new() };
    let map = sweep_sensitivity(&state, &p.sys, &p.objective, &removable, &addable).map_err(CliError::numerical)?;
    write(&a.out, map.to_csv().as_bytes())?;
    let side = a.out.with_extension("json");
    let body = json!({
        "objective": map.objective_current,
        "q": run_bound(&cfg, p.q_lb).map(|b| map.objective_current / b),
        "q_lb": p.q_lb,
        "gene": gene.to_text(),
        "candidates": map.entries.len(),
        "excluded": map.entries.iter().filter(|e| e.tau.is_none()).count(),
    });
    write(&side, pretty(&body).as_bytes())?;
    println!("objective = {}", map.objective_current);
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<(), CliError> {
    let cfg = load_config(a.input.config.as_deref())?;
    let p = prepare(&a.input.operators, &cfg)?;
    let gene = read_gene(&a.input.gene, &p.template)?;
    let state = ReanalysisState::from_gene(&p.sys, &gene).map_err(CliError::numerical)?;
    let f = p.objective.evaluate(state.active(), state.current()).map_err(CliError::numerical)?;
    let metrics = report(&p.ops, &state.full_current()).map_err(CliError::numerical)?;
    let body = json!({
        "gene": gene.to_text(),
        "objective": f,
        "q_lb": p.q_lb,
        "active_dofs": state.len(),
        "metrics": metrics,
    });
    emit(a.out.as_deref(), &body)
}

fn cmd_verify(a: &VerifyArgs) -> Result<(), CliError> {
    let m = RunManifest::read(&a.run_dir)?;
    m.operators.check()?;
    if let Some(c) = &m.config {
        c.check()?;
    }
    let mut cfg = load_config(m.config.as_ref().map(|c| c.path.as_path()))?;
    if cfg.memetic.seed != m.seed {
        return Err(CliError::Verify(format!("config seed {} differs from manifest seed {}", cfg.memetic.seed, m.seed)));
    }
    cfg.memetic.j_max = cfg.memetic.j_max.min(2);
    let (_, r) = run(&m.operators.path, &cfg)?;
    let stored = read_text(&a.run_dir.join("trace.csv"))?;
    let keep = |text: &str| -> Vec<String> {
        text.lines()
            .skip(1)
            .filter(|l| l.split(',').next().and_then(|j| j.parse::<usize>().ok()).is_some_and(|j| j <= 2))
            .map(str::to_string)
            .collect()
    };
    let (old, new) = (keep(&stored), keep(&r.trace_csv()));
    if let Some(k) = (0..old.len().max(new.len())).find(|&k| old.get(k) != new.get(k)) {
        return Err(CliError::Verify(format!(
            "trace row {} differs: recorded `{}`, replayed `{}`",
            k + 1,
            old.get(k).map_or("<none>", |s| s),
            new.get(k).map_or("<none>", |s| s)
        )));
    }
    println!("verified: inputs unchanged, {} trace rows of the first two generations reproduced", old.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let res = match &cli.command {
        Command::Assemble(a) => cmd_assemble(a),
        Command::Bound(a) => cmd_bound(a),
        Command::Optimize(a) => cmd_optimize(a, cli.threads),
        Command::Sensitivity(a) => cmd_sensitivity(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
