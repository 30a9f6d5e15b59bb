//! Command-line front end.
//!
//! ```text
//! robust-trigger synth    --config exp.json --out results/
//! robust-trigger simulate --config exp.json --out results/ --seed 3
//! robust-trigger compare  --config exp.json --out results/
//! robust-trigger verify   --config exp.json --out results/
//! robust-trigger scaffold --config exp.json --preset paper
//! ```
//!
//! Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 verification
//! failure, 1 anything else (I/O).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{preset, ConfigError, Experiment, ExperimentConfig, PRESETS};
use crate::matrix::Matrix;
use crate::sim::{compare_policies, simulate, LoopSetup, SimError, SimTrace};
use crate::synthesis::{
    synthesize_matched_with, synthesize_with, DesignKind, FeasibilityReport, SynthesisError,
    SynthesisOptions, SynthesisOutcome,
};
use crate::verify::{audit, identity_campaign, lemma1_campaign, AuditInstance, VerifyError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "robust-trigger", version, about = "Robust event-triggered control toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize P, K, L, Z, Q1, mu and the feasibility report.
    Synth(CommonArgs),
    /// Simulate the configured policy and write a CSV trace.
    Simulate(CommonArgs),
    /// Run periodic and event-triggered policies side by side.
    Compare(CommonArgs),
    /// Run every checker plus the random campaigns.
    Verify(CommonArgs),
    /// Write a preset config to --config.
    Scaffold(ScaffoldArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// Overrides `simulation.seed`.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ScaffoldArgs {
    /// Where to write the config; relative paths are taken under --out.
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, default_value = "paper", value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    pub preset: String,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_OTHER,
        }
    }
}

impl From<SynthesisError> for CliError {
    fn from(e: SynthesisError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

/// Result of a subcommand that ran to completion.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    /// Human-readable summary for stdout.
    pub summary: String,
    pub written: Vec<PathBuf>,
}

/// Parses `args` (including the program name), runs, prints, and returns
/// the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(out) => {
            print!("{}", out.summary);
            out.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Scaffold(args) => cmd_scaffold(args),
    }
}

fn load(args: &CommonArgs) -> Result<Experiment, CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.simulation.seed = seed;
    }
    Ok(cfg.validate()?)
}

/// Rounds every float in `v` to 12 significant digits.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                let x = n.as_f64().expect("f64 number");
                let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
                if let Some(r) = serde_json::Number::from_f64(rounded) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

fn to_json<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("report types serialize")
}

fn write_json(dir: &Path, name: &str, mut value: Value) -> Result<PathBuf, CliError> {
    round_json(&mut value);
    let mut text = serde_json::to_string_pretty(&value).expect("json values serialize");
    text.push('\n');
    write_file(dir, name, text.as_bytes())
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

/// Synthesis result or the partial design left by a failed one.
#[derive(Debug)]
pub struct Controller {
    pub k: Matrix,
    pub p: Matrix,
    pub outcome: Option<SynthesisOutcome>,
    pub failure: Option<SynthesisError>,
}

impl Controller {
    pub fn mu(&self) -> Option<f64> {
        self.outcome.as_ref().map(|o| o.mu)
    }

    pub fn report(&self) -> Option<&FeasibilityReport> {
        self.outcome
            .as_ref()
            .map(|o| &o.report)
            .or_else(|| self.failure.as_ref().and_then(|e| e.diagnosis()).map(|d| &d.report))
    }
}

/// Runs the configured synthesis. Errors without a usable gain are
/// returned as `Err`.
pub fn controller(exp: &Experiment) -> Result<Controller, SynthesisError> {
    let mut opts = SynthesisOptions::default();
    opts.report.grid_points = exp.audit.grid_points;
    let result = match (&exp.design, &exp.matched) {
        (DesignKind::Matched, Some(matched)) => synthesize_matched_with(exp.a(), exp.b(), matched, &exp.params, &opts),
        _ => synthesize_with(exp.a(), exp.b(), exp.model(), &exp.params, &opts),
    };
    match result {
        Ok(out) => Ok(Controller {
            k: out.k.clone(),
            p: out.p.clone(),
            outcome: Some(out),
            failure: None,
        }),
        Err(e) => {
            let (k, p) = match e.diagnosis() {
                Some(d) => (d.design.k.clone(), d.design.p.clone()),
                None => return Err(e),
            };
            Ok(Controller {
                k,
                p,
                outcome: None,
                failure: Some(e),
            })
        }
    }
}

fn fmt_matrix(m: &Matrix) -> String {
    let rows: Vec<String> = m
        .to_rows()
        .iter()
        .map(|r| r.iter().map(|v| format!("{:.6}", v + 0.0)).collect::<Vec<_>>().join(", "))
        .collect();
    format!("[{}]", rows.join("; "))
}

fn report_lines(out: &mut String, report: &FeasibilityReport) {
    for e in &report.entries {
        let margin = e.margin.map_or("n/a".to_string(), |m| format!("{m:.6e}"));
        let _ = write!(out, "  {:<24} {:<8} margin {margin}", e.condition.id(), format!("{:?}", e.verdict).to_lowercase());
        if let Some(p) = &e.witness_p {
            let _ = write!(out, " at p = {p:?}");
        }
        if let Some(note) = &e.note {
            let _ = write!(out, " ({note})");
        }
        out.push('\n');
    }
}

pub fn cmd_synth(args: &CommonArgs) -> Result<Outcome, CliError> {
    let exp = load(args)?;
    let ctrl = controller(&exp)?;
    let mut summary = String::new();
    let (artifact, code) = match (&ctrl.outcome, &ctrl.failure) {
        (Some(out), _) => {
            let _ = writeln!(summary, "synthesis completed ({} design, {} iterations)", design_name(out.kind), out.iterations);
            let _ = writeln!(summary, "K  = {}", fmt_matrix(&out.k));
            let _ = writeln!(summary, "L  = {}", fmt_matrix(&out.l));
            let _ = writeln!(summary, "mu = {:.6}", out.mu);
            (json!({ "status": "ok", "synthesis": to_json(out), "feasibility_holds": out.report.all_hold() }), EXIT_OK)
        }
        (None, Some(err)) => {
            let d = err.diagnosis().expect("controller keeps only diagnosed failures");
            let _ = writeln!(summary, "synthesis failed: {err}");
            let _ = writeln!(summary, "K  = {}", fmt_matrix(&d.design.k));
            let _ = writeln!(summary, "L  = {}", fmt_matrix(&d.design.l));
            (json!({ "status": "failed", "error": err.to_string(), "diagnosis": to_json(d) }), EXIT_NUMERICAL)
        }
        (None, None) => unreachable!("controller returns an outcome or a failure"),
    };
    if let Some(report) = ctrl.report() {
        summary.push_str("feasibility:\n");
        report_lines(&mut summary, report);
    }
    let path = write_json(&args.out, &exp.output.synthesis, artifact)?;
    let _ = writeln!(summary, "wrote {}", path.display());
    Ok(Outcome {
        code,
        summary,
        written: vec![path],
    })
}

fn design_name(kind: DesignKind) -> &'static str {
    match kind {
        DesignKind::Mismatched => "mismatched",
        DesignKind::Matched => "matched",
    }
}

fn trigger_mu(exp: &Experiment, ctrl: &Controller) -> Option<f64> {
    exp.mu_override.or(ctrl.mu())
}

fn no_mu(ctrl: &Controller) -> CliError {
    let why = ctrl.failure.as_ref().map_or("no trigger coefficient".to_string(), |e| e.to_string());
    CliError::Numerical(format!("{why}; set simulation.mu to run with an explicit coefficient"))
}

fn run_trace(exp: &Experiment, ctrl: &Controller) -> Result<SimTrace, CliError> {
    let mu = trigger_mu(exp, ctrl);
    let policy = match exp.trigger_policy(mu) {
        Ok(p) => p,
        Err(_) if mu.is_none() => return Err(no_mu(ctrl)),
        Err(e) => return Err(e.into()),
    };
    let mut setup = LoopSetup::new(&exp.plant, &ctrl.k).with_lyapunov(&ctrl.p);
    setup.sample_time = exp.sample_time;
    Ok(simulate(&setup, &policy, &exp.trajectory, &exp.x0, exp.steps)?)
}

pub fn cmd_simulate(args: &CommonArgs) -> Result<Outcome, CliError> {
    let exp = load(args)?;
    let ctrl = controller(&exp)?;
    let trace = run_trace(&exp, &ctrl)?;
    let mut csv = Vec::new();
    trace
        .write_csv(&mut csv)
        .map_err(|e| CliError::Io(format!("cannot format trace: {e}")))?;
    let path = write_file(&args.out, &exp.output.trace, &csv)?;
    let s = trace.summary();
    let mut summary = String::new();
    if let Some(err) = &ctrl.failure {
        let _ = writeln!(summary, "note: {err}");
    }
    let _ = writeln!(summary, "rows: {}", s.rows);
    let _ = writeln!(summary, "transmissions: {}", s.transmissions);
    let _ = writeln!(summary, "final |x|: {:.6e}", s.final_norm);
    if trace.diverged {
        let _ = writeln!(summary, "diverged: state norm exceeded {:e}", crate::sim::DIVERGENCE_NORM);
    }
    if !trace.clamped_steps.is_empty() {
        let _ = writeln!(summary, "p clamped into the box at steps {:?}", trace.clamped_steps);
    }
    let _ = writeln!(summary, "wrote {}", path.display());
    Ok(Outcome {
        code: EXIT_OK,
        summary,
        written: vec![path],
    })
}

pub fn cmd_compare(args: &CommonArgs) -> Result<Outcome, CliError> {
    let exp = load(args)?;
    let ctrl = controller(&exp)?;
    let mu = trigger_mu(&exp, &ctrl).ok_or_else(|| no_mu(&ctrl))?;
    let mut setup = LoopSetup::new(&exp.plant, &ctrl.k).with_lyapunov(&ctrl.p);
    setup.sample_time = exp.sample_time;
    let cmp = compare_policies(&setup, mu, &exp.trajectory, &exp.x0, exp.steps)?;
    let path = write_json(&args.out, &exp.output.compare, json!({ "steps": exp.steps, "comparison": to_json(&cmp) }))?;

    let mut summary = String::new();
    let _ = writeln!(summary, "{:<10} {:>13} {:>13} {:>9}", "policy", "transmissions", "final |x|", "max gap");
    for (name, s) in [("periodic", &cmp.periodic), ("event", &cmp.event)] {
        let gap = s.max_gap.map_or("-".to_string(), |g| g.to_string());
        let _ = writeln!(summary, "{name:<10} {:>13} {:>13.6e} {gap:>9}", s.transmissions, s.final_norm);
    }
    let _ = writeln!(summary, "mu = {mu:.6}, savings ratio = {:.6}", cmp.savings_ratio);
    let _ = writeln!(summary, "wrote {}", path.display());
    Ok(Outcome {
        code: EXIT_OK,
        summary,
        written: vec![path],
    })
}

pub fn cmd_verify(args: &CommonArgs) -> Result<Outcome, CliError> {
    let exp = load(args)?;
    let ctrl = controller(&exp)?;
    let samples = exp.audit.samples;
    let mut summary = String::new();

    let (artifact, holds) = match &ctrl.outcome {
        Some(out) => {
            let trace = run_trace(&exp, &ctrl)?;
            let inst = AuditInstance {
                a: exp.a(),
                b: exp.b(),
                model: exp.model(),
                params: &exp.params,
                design: out,
            };
            let report = audit(&inst, Some(&trace), exp.audit.grid_points, samples, exp.seed)?;
            summary.push_str("feasibility:\n");
            report_lines(&mut summary, &out.report);
            for c in &report.checks {
                let _ = writeln!(summary, "  {:<24} {:<8} margin {:.6e}", c.name, verdict(c.holds), c.margin);
            }
            if let Some(d) = &report.dissipation {
                for c in d.checks() {
                    let _ = writeln!(summary, "  {:<24} {:<8} margin {:.6e}", c.name, verdict(c.holds), c.margin);
                }
            }
            let holds = report.holds();
            (json!({ "status": if holds { "holds" } else { "fails" }, "audit": to_json(&report) }), holds)
        }
        None => {
            let err = ctrl.failure.as_ref().expect("controller keeps the failure");
            let _ = writeln!(summary, "synthesis failed: {err}");
            if let Some(report) = ctrl.report() {
                summary.push_str("feasibility:\n");
                report_lines(&mut summary, report);
            }
            let campaigns = if samples > 0 {
                vec![identity_campaign(samples, exp.seed)?, lemma1_campaign(samples, exp.seed)?]
            } else {
                Vec::new()
            };
            (
                json!({
                    "status": "fails",
                    "error": err.to_string(),
                    "feasibility": ctrl.report().map(to_json),
                    "campaigns": to_json(&campaigns),
                }),
                false,
            )
        }
    };
    if let Some(campaigns) = artifact.pointer("/audit/campaigns").or_else(|| artifact.get("campaigns")) {
        for c in campaigns.as_array().into_iter().flatten() {
            let _ = writeln!(
                summary,
                "  campaign {:<15} {} samples, {} failures",
                c["name"].as_str().unwrap_or("?"),
                c["samples"],
                c["failures"]
            );
        }
    }
    let path = write_json(&args.out, &exp.output.verify, artifact)?;
    let _ = writeln!(summary, "{}", if holds { "all checks hold" } else { "verification failed" });
    let _ = writeln!(summary, "wrote {}", path.display());
    Ok(Outcome {
        code: if holds { EXIT_OK } else { EXIT_VERIFICATION },
        summary,
        written: vec![path],
    })
}

fn verdict(holds: bool) -> &'static str {
    if holds {
        "holds"
    } else {
        "fails"
    }
}

pub fn cmd_scaffold(args: &ScaffoldArgs) -> Result<Outcome, CliError> {
    let mut cfg = preset(&args.preset)?;
    if let Some(seed) = args.seed {
        cfg.simulation.seed = seed;
    }
    let path = if args.config.is_absolute() {
        args.config.clone()
    } else {
        args.out.join(&args.config)
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Io(format!("{} is not a file path", path.display())))?
        .to_string_lossy()
        .into_owned();
    let written = write_file(dir, &name, cfg.to_json().as_bytes())?;
    Ok(Outcome {
        code: EXIT_OK,
        summary: format!("wrote {} (preset {})\n", written.display(), args.preset),
        written: vec![written],
    })
}
