use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_robust-trigger"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn scaffold(dir: &Path, preset: &str) -> PathBuf {
    let path = dir.join(format!("{preset}.json"));
    let out = run(&["scaffold", "--config", path.to_str().unwrap(), "--preset", preset]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

fn edit(path: &Path, f: impl FnOnce(&mut Value)) {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    f(&mut v);
    fs::write(path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
}

fn sub(cmd: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn scaffold_round_trips_every_preset() {
    let dir = TempDir::new().unwrap();
    for preset in ["paper", "paper-restricted", "feasible", "scalar", "golden"] {
        let path = scaffold(dir.path(), preset);
        let cfg = robust_trigger::config::ExperimentConfig::load(&path).unwrap();
        assert_eq!(cfg, robust_trigger::config::preset(preset).unwrap());
    }
    let bad = run(&["scaffold", "--config", "x.json", "--preset", "nope"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn synth_exit_codes_follow_feasibility() {
    let dir = TempDir::new().unwrap();
    let benchmark = scaffold(dir.path(), "paper");
    let o = sub("synth", &benchmark, &dir.path().join("p"), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("epsilon_margin"));
    let art: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("p/synthesis.json")).unwrap()).unwrap();
    assert_eq!(art["status"], "failed");
    assert!(art["diagnosis"]["design"]["k"].is_array());

    let feasible = scaffold(dir.path(), "feasible");
    let o = sub("synth", &feasible, &dir.path().join("f"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let art: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("f/synthesis.json")).unwrap()).unwrap();
    assert_eq!(art["status"], "ok");
    assert_eq!(art["feasibility_holds"], true);
    assert!(stdout(&o).contains("mu = 0.011299"));
}

#[test]
fn verify_exit_codes() {
    let dir = TempDir::new().unwrap();
    let benchmark = scaffold(dir.path(), "paper");
    let o = sub("verify", &benchmark, &dir.path().join("p"), &[]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("verification failed"));
    assert!(dir.path().join("p/verify.json").exists());

    let feasible = scaffold(dir.path(), "feasible");
    let o = sub("verify", &feasible, &dir.path().join("f"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("all checks hold"));
}

#[test]
fn config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let o = sub("synth", &dir.path().join("missing.json"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));

    let garbage = dir.path().join("garbage.json");
    fs::write(&garbage, "{ not json").unwrap();
    assert_eq!(sub("synth", &garbage, dir.path(), &[]).status.code(), Some(2));

    let unknown = scaffold(dir.path(), "paper");
    edit(&unknown, |v| {
        v["params"]["k"] = Value::from(1.0);
    });
    let o = sub("synth", &unknown, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`k`"), "{}", stderr(&o));

    let shape = scaffold(dir.path(), "feasible");
    edit(&shape, |v| {
        v["system"]["b"] = serde_json::json!([[1.0], [0.0], [0.0]]);
    });
    assert_eq!(sub("synth", &shape, dir.path(), &[]).status.code(), Some(2));

    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn epsilon_one_names_the_violated_condition() {
    let dir = TempDir::new().unwrap();
    let cfg = scaffold(dir.path(), "paper");
    edit(&cfg, |v| v["params"]["epsilon"] = Value::from(1.0));
    let o = sub("synth", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("epsilon_margin"));
}

#[test]
fn simulate_writes_one_row_per_step() {
    let dir = TempDir::new().unwrap();
    let cfg = scaffold(dir.path(), "paper");
    let o = sub("simulate", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 22);
    assert_eq!(lines[0], "k,t,x_1,x_2,u_1,e_norm_sq,threshold,triggered,p,V");
    // n + m + 7 columns
    assert!(lines.iter().all(|l| l.split(',').count() == 10));
    let fired = lines[1..].iter().filter(|l| l.split(',').nth(7) == Some("1")).count();
    assert!(fired < 20);

    edit(&cfg, |v| v["simulation"]["policy"] = Value::from("periodic"));
    let o = sub("simulate", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(7) == Some("1")));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = scaffold(dir.path(), "paper-restricted");
    for cmd in ["synth", "simulate", "compare", "verify"] {
        sub(cmd, &cfg, &dir.path().join("a"), &[]);
        sub(cmd, &cfg, &dir.path().join("b"), &[]);
    }
    for name in ["synthesis.json", "trace.csv", "compare.json", "verify.json"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = TempDir::new().unwrap();
    let cfg = scaffold(dir.path(), "paper-restricted");
    sub("simulate", &cfg, &dir.path().join("s1"), &["--seed", "1"]);
    sub("simulate", &cfg, &dir.path().join("s2"), &["--seed", "2"]);
    edit(&cfg, |v| v["simulation"]["seed"] = Value::from(1));
    sub("simulate", &cfg, &dir.path().join("c1"), &[]);
    let read = |d: &str| fs::read(dir.path().join(d).join("trace.csv")).unwrap();
    assert_eq!(read("s1"), read("c1"));
    assert_ne!(read("s1"), read("s2"));
}

#[test]
fn compare_reports_savings() {
    let dir = TempDir::new().unwrap();
    let cfg = scaffold(dir.path(), "paper");
    let o = sub("compare", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("compare.json")).unwrap()).unwrap();
    assert_eq!(v["comparison"]["periodic"]["transmissions"], 21);
    assert!(v["comparison"]["savings_ratio"].as_f64().unwrap() > 0.0);

    edit(&cfg, |v| v["simulation"]["mu"] = Value::from(1e-12));
    sub("compare", &cfg, dir.path(), &[]);
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("compare.json")).unwrap()).unwrap();
    assert_eq!(v["comparison"]["savings_ratio"].as_f64(), Some(0.0));
}

#[test]
fn missing_mu_on_failed_synthesis_is_numerical() {
    let dir = TempDir::new().unwrap();
    let cfg = scaffold(dir.path(), "paper");
    edit(&cfg, |v| {
        v["simulation"].as_object_mut().unwrap().remove("mu");
    });
    let o = sub("simulate", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("simulation.mu"));
}
