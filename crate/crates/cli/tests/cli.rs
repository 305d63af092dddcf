use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use momtopo::operators::{load_operators, save_operators};
use momtopo::C64;
use tempfile::TempDir;

fn momtopo(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_momtopo")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn toy(dir: &Path, name: &str) -> PathBuf {
    let o = momtopo(&["assemble", "--plate", "2x1", "--nx", "3", "--ny", "2", "--ka", "0.5", "--out", name], dir);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    dir.join(name)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn assemble_is_byte_deterministic() {
    let d = TempDir::new().unwrap();
    let a = std::fs::read(toy(d.path(), "a.mtop")).unwrap();
    let b = std::fs::read(toy(d.path(), "b.mtop")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn assemble_reports_dof_count() {
    let d = TempDir::new().unwrap();
    let o = momtopo(&["assemble", "--plate", "2x1", "--nx", "3", "--ny", "2", "--ka", "0.5", "--out", "t.mtop"], d.path());
    assert!(String::from_utf8_lossy(&o.stdout).contains("N_dof = 13"));
}

#[test]
fn missing_output_directory_is_io_error() {
    let d = TempDir::new().unwrap();
    let o = momtopo(
        &["assemble", "--plate", "2x1", "--nx", "3", "--ny", "2", "--ka", "0.5", "--out", "nowhere/t.mtop"],
        d.path(),
    );
    assert_eq!(code(&o), 3);
    assert!(!d.path().join("nowhere").exists());
}

#[test]
fn bad_magic_is_container_error() {
    let d = TempDir::new().unwrap();
    std::fs::write(d.path().join("bad.mtop"), b"not a container at all").unwrap();
    let o = momtopo(&["bound", "bad.mtop"], d.path());
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn missing_operator_file_is_io_error() {
    let d = TempDir::new().unwrap();
    let o = momtopo(&["bound", "absent.mtop"], d.path());
    assert_eq!(code(&o), 3);
}

#[test]
fn config_errors_list_every_key() {
    let d = TempDir::new().unwrap();
    toy(d.path(), "t.mtop");
    std::fs::write(d.path().join("bad.toml"), "p_c = 3.0\nn_agents = 1\nbogus = 1\nseed = \"x\"\n").unwrap();
    let o = momtopo(&["optimize", "t.mtop", "--config", "bad.toml", "--out-dir", "out"], d.path());
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    for k in ["p_c", "n_agents", "bogus", "seed"] {
        assert!(err.contains(&format!("`{k}`")), "{k} missing from {err}");
    }
    assert!(!d.path().join("out").exists());
}

#[test]
fn gap_dof_must_be_a_gap_edge() {
    let d = TempDir::new().unwrap();
    toy(d.path(), "t.mtop");
    std::fs::write(d.path().join("c.toml"), "gap_dof = 0\n").unwrap();
    let o = momtopo(&["optimize", "t.mtop", "--config", "c.toml", "--out-dir", "out"], d.path());
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn optimize_repeats_identically_and_verifies() {
    let d = TempDir::new().unwrap();
    toy(d.path(), "t.mtop");
    std::fs::write(d.path().join("c.toml"), "seed = 5\nn_agents = 6\nj_max = 4\neps_glob = 0.0\n").unwrap();
    for out in ["r1", "r2"] {
        let o = momtopo(&["optimize", "t.mtop", "--config", "c.toml", "--out-dir", out], d.path());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let t1 = std::fs::read_to_string(d.path().join("r1/trace.csv")).unwrap();
    let t2 = std::fs::read_to_string(d.path().join("r2/trace.csv")).unwrap();
    assert_eq!(t1, t2);
    assert!(t1.starts_with("j,i,agent,f,q,active_dofs\n"));
    assert_eq!(
        std::fs::read(d.path().join("r1/result.json")).unwrap(),
        std::fs::read(d.path().join("r2/result.json")).unwrap()
    );

    let m = json(&d.path().join("r1/manifest.json"));
    assert_eq!(m["seed"], 5);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 3);

    let o = momtopo(&["verify", "r1"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn verify_detects_modified_inputs() {
    let d = TempDir::new().unwrap();
    toy(d.path(), "t.mtop");
    std::fs::write(d.path().join("c.toml"), "seed = 2\nn_agents = 4\nj_max = 2\n").unwrap();
    let o = momtopo(&["optimize", "t.mtop", "--config", "c.toml", "--out-dir", "r"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    std::fs::write(d.path().join("c.toml"), "seed = 3\nn_agents = 4\nj_max = 2\n").unwrap();
    let o = momtopo(&["verify", "r"], d.path());
    assert_eq!(code(&o), 6, "{}", stderr(&o));
}

#[test]
fn verify_detects_tampered_trace() {
    let d = TempDir::new().unwrap();
    toy(d.path(), "t.mtop");
    std::fs::write(d.path().join("c.toml"), "seed = 2\nn_agents = 4\nj_max = 2\n").unwrap();
    let o = momtopo(&["optimize", "t.mtop", "--config", "c.toml", "--out-dir", "r"], d.path());
    assert_eq!(code(&o), 0);
    let p = d.path().join("r/trace.csv");
    let text = std::fs::read_to_string(&p).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    lines[1] = lines[1].replacen("0,0,0,", "0,0,1,", 1);
    std::fs::write(&p, lines.join("\n") + "\n").unwrap();
    let o = momtopo(&["verify", "r"], d.path());
    assert_eq!(code(&o), 6, "{}", stderr(&o));
}

#[test]
fn loose_bound_factor_never_terminates_on_bound() {
    let d = TempDir::new().unwrap();
    toy(d.path(), "t.mtop");
    for seed in 0..4 {
        let cfg = format!("seed = {seed}\nn_agents = 6\nj_max = 6\nc_bnd = 1.1\n");
        std::fs::write(d.path().join("c.toml"), cfg).unwrap();
        let out = format!("r{seed}");
        let o = momtopo(&["optimize", "t.mtop", "--config", "c.toml", "--out-dir", &out], d.path());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let r = json(&d.path().join(&out).join("result.json"));
        assert_ne!(r["termination"], "bound");
        assert!(r["q"].as_f64().unwrap() > 1.1);
    }
}

#[test]
fn reactance_free_operators_give_zero_multiplier() {
    let d = TempDir::new().unwrap();
    let path = toy(d.path(), "t.mtop");
    let mut ops = load_operators(&path).unwrap();
    ops.z0 = ops.z0.map(|z| C64::new(z.re, 0.0));
    save_operators(&ops, &d.path().join("x0.mtop")).unwrap();
    let o = momtopo(&["bound", "x0.mtop", "--out", "b.json"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let b = json(&d.path().join("b.json"));
    assert_eq!(b["nu"].as_f64().unwrap(), 0.0);
    assert!(b["q_lb"].as_f64().unwrap() > 0.0);
}

#[test]
fn bound_writes_current_csv() {
    let d = TempDir::new().unwrap();
    toy(d.path(), "t.mtop");
    let o = momtopo(&["bound", "t.mtop", "--current-out", "i.csv"], d.path());
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(d.path().join("i.csv")).unwrap();
    assert_eq!(csv.lines().count(), 14);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report["q_lb"].as_f64().unwrap() > 0.0);
}

#[test]
fn sensitivity_and_eval_agree_on_objective() {
    let d = TempDir::new().unwrap();
    toy(d.path(), "t.mtop");
    let o = momtopo(&["sensitivity", "t.mtop", "--gene", "ones", "--out", "s.csv"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(d.path().join("s.csv")).unwrap();
    assert!(csv.starts_with("dof,action,tau\n"));
    // every free DOF is removable from the full plate
    assert_eq!(csv.lines().count(), 13);
    let side = json(&d.path().join("s.json"));

    let o = momtopo(&["eval", "t.mtop", "--gene", "ones", "--out", "e.json"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let e = json(&d.path().join("e.json"));
    let (a, b) = (side["objective"].as_f64().unwrap(), e["objective"].as_f64().unwrap());
    assert!((a - b).abs() <= 1e-12 * a.abs());
}

#[test]
fn gene_file_round_trips_through_eval() {
    let d = TempDir::new().unwrap();
    toy(d.path(), "t.mtop");
    std::fs::write(d.path().join("c.toml"), "seed = 1\nn_agents = 4\nj_max = 2\n").unwrap();
    let o = momtopo(&["optimize", "t.mtop", "--config", "c.toml", "--out-dir", "r"], d.path());
    assert_eq!(code(&o), 0);
    let r = json(&d.path().join("r/result.json"));
    assert_eq!(std::fs::read_to_string(d.path().join("r/best.gene")).unwrap(), r["best_gene"].as_str().unwrap());
    let o = momtopo(&["eval", "t.mtop", "--gene", "r/best.gene", "--config", "c.toml", "--out", "e.json"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let e = json(&d.path().join("e.json"));
    let (a, b) = (r["f"].as_f64().unwrap(), e["objective"].as_f64().unwrap());
    assert!((a - b).abs() <= 1e-10 * a.abs(), "{a} vs {b}");
}
