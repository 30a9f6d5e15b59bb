//! Experiment configuration files.
//!
//! JSON, one object per experiment, matrices as arrays of rows:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "system": {
//!     "a": [[0, 1], [1, 0]],
//!     "b": [[0], [1]],
//!     "uncertainty": { "basis": [[[1, 1], [0, 0]]], "p_lo": [0], "p_hi": [0.8] },
//!     "f": [[6.09, 6.09], [6.09, 6.09]]
//!   },
//!   "params": { "q": [[1, 0], [0, 1]], "r1": [[1]], "r2": [[1, 0], [0, 1]],
//!               "alpha": 10, "beta": 5, "epsilon": 0.1, "sigma": 0.1 },
//!   "simulation": { "x0": [1, -1], "mu": 0.29,
//!                   "p_trajectory": { "kind": "constant", "value": [0.8] } }
//! }
//! ```
//!
//! Unknown fields are rejected, so a config cannot smuggle in a gain: the
//! controller always comes from the synthesis.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::sim::{ParamTrajectory, Plant, TriggerPolicy};
use crate::synthesis::{DesignKind, MatchedModel, SynthesisParams, UncertaintyModel};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("unknown preset `{0}` (expected one of: {list})", list = PRESETS.join(", "))]
    UnknownPreset(String),
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub system: SystemBlock,
    pub params: ParamsBlock,
    #[serde(default)]
    pub simulation: SimulationBlock,
    #[serde(default)]
    pub audit: AuditBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    pub a: Matrix,
    pub b: Matrix,
    pub uncertainty: UncertaintyBlock,
    /// Bound `F` on the uncertainty.
    pub f: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintyBlock {
    /// `dA(p) = sum_i p_i basis[i]`.
    pub basis: Vec<Matrix>,
    pub p_lo: Vec<f64>,
    pub p_hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsBlock {
    pub q: Matrix,
    pub r1: Matrix,
    pub r2: Matrix,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub sigma: f64,
    #[serde(default = "default_design")]
    pub design: DesignKind,
}

fn default_design() -> DesignKind {
    DesignKind::Mismatched
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Periodic,
    Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySpec {
    Constant { value: Vec<f64> },
    Ramp { from: Vec<f64>, to: Vec<f64> },
    Sequence { values: Vec<Vec<f64>> },
    /// Draws from the parameter box using the simulation seed.
    UniformRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    #[serde(default)]
    pub x0: Vec<f64>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_policy")]
    pub policy: PolicyKind,
    /// Overrides the synthesized trigger coefficient.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_trajectory: Option<TrajectorySpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sample_time")]
    pub sample_time: f64,
}

fn default_steps() -> usize {
    20
}
fn default_policy() -> PolicyKind {
    PolicyKind::Event
}
fn default_sample_time() -> f64 {
    1.0
}

impl Default for SimulationBlock {
    fn default() -> Self {
        Self {
            x0: Vec::new(),
            steps: default_steps(),
            policy: default_policy(),
            mu: None,
            p_trajectory: None,
            seed: 0,
            sample_time: default_sample_time(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditBlock {
    /// Grid points per parameter axis for the box searches.
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    /// Samples per random campaign in `verify`.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_grid() -> usize {
    101
}
fn default_samples() -> usize {
    crate::verify::DEFAULT_SAMPLES
}

impl Default for AuditBlock {
    fn default() -> Self {
        Self {
            grid_points: default_grid(),
            samples: default_samples(),
        }
    }
}

/// File names written under `--out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_synthesis_file")]
    pub synthesis: String,
    #[serde(default = "default_trace_file")]
    pub trace: String,
    #[serde(default = "default_compare_file")]
    pub compare: String,
    #[serde(default = "default_verify_file")]
    pub verify: String,
}

fn default_synthesis_file() -> String {
    "synthesis.json".into()
}
fn default_trace_file() -> String {
    "trace.csv".into()
}
fn default_compare_file() -> String {
    "compare.json".into()
}
fn default_verify_file() -> String {
    "verify.json".into()
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            synthesis: default_synthesis_file(),
            trace: default_trace_file(),
            compare: default_compare_file(),
            verify: default_verify_file(),
        }
    }
}

/// A config after validation, with the library types built.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub plant: Plant,
    pub params: SynthesisParams,
    pub design: DesignKind,
    /// Present when `design` is matched.
    pub matched: Option<MatchedModel>,
    pub x0: Vec<f64>,
    pub steps: usize,
    pub policy: PolicyKind,
    pub mu_override: Option<f64>,
    pub trajectory: ParamTrajectory,
    pub seed: u64,
    pub sample_time: f64,
    pub audit: AuditBlock,
    pub output: OutputBlock,
}

impl Experiment {
    pub fn a(&self) -> &Matrix {
        self.plant.a()
    }
    pub fn b(&self) -> &Matrix {
        self.plant.b()
    }
    pub fn model(&self) -> &UncertaintyModel {
        self.plant.model()
    }

    /// Trigger policy given the synthesized coefficient.
    pub fn trigger_policy(&self, synthesized_mu: Option<f64>) -> Result<TriggerPolicy, ConfigError> {
        match self.policy {
            PolicyKind::Periodic => Ok(TriggerPolicy::Periodic),
            PolicyKind::Event => {
                let mu = self
                    .mu_override
                    .or(synthesized_mu)
                    .ok_or_else(|| invalid("simulation.mu", "no trigger coefficient: synthesis failed and no override given"))?;
                TriggerPolicy::event(mu).map_err(|e| invalid("simulation.mu", e.to_string()))
            }
        }
    }
}

fn check_shape(field: &str, m: &Matrix, rows: usize, cols: usize) -> Result<(), ConfigError> {
    if m.shape() != (rows, cols) {
        return Err(invalid(
            field,
            format!("expected {rows}x{cols}, got {}x{}", m.rows(), m.cols()),
        ));
    }
    Ok(())
}

fn check_len(field: &str, v: &[f64], len: usize) -> Result<(), ConfigError> {
    if v.len() != len {
        return Err(invalid(field, format!("expected {len} entries, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(invalid(field, "entries must be finite"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Checks every dimension and range and builds the library types.
    pub fn validate(&self) -> Result<Experiment, ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let sys = &self.system;
        let n = sys.a.rows();
        if n == 0 {
            return Err(invalid("system.a", "must be non-empty"));
        }
        check_shape("system.a", &sys.a, n, n)?;
        if sys.b.rows() != n || sys.b.cols() == 0 {
            return Err(invalid(
                "system.b",
                format!("expected {n} rows and at least one column, got {}x{}", sys.b.rows(), sys.b.cols()),
            ));
        }
        let m = sys.b.cols();
        check_shape("system.f", &sys.f, n, n)?;
        let unc = &sys.uncertainty;
        let q = unc.basis.len();
        for (i, e) in unc.basis.iter().enumerate() {
            check_shape(&format!("system.uncertainty.basis[{i}]"), e, n, n)?;
        }
        check_len("system.uncertainty.p_lo", &unc.p_lo, q)?;
        check_len("system.uncertainty.p_hi", &unc.p_hi, q)?;
        let model = UncertaintyModel::new(unc.basis.clone(), unc.p_lo.clone(), unc.p_hi.clone(), sys.f.clone())
            .map_err(|e| invalid("system.uncertainty", e.to_string()))?;

        let pb = &self.params;
        check_shape("params.q", &pb.q, n, n)?;
        check_shape("params.r1", &pb.r1, m, m)?;
        check_shape("params.r2", &pb.r2, n, n)?;
        let params = SynthesisParams::new(
            pb.q.clone(),
            pb.r1.clone(),
            pb.r2.clone(),
            pb.alpha,
            pb.beta,
            pb.epsilon,
            pb.sigma,
        )
        .map_err(|e| invalid("params", e.to_string()))?;
        let matched = match pb.design {
            DesignKind::Matched => Some(
                MatchedModel::from_uncertainty(&model, &sys.b)
                    .map_err(|e| invalid("params.design", e.to_string()))?,
            ),
            DesignKind::Mismatched => None,
        };

        let sim = &self.simulation;
        let x0 = if sim.x0.is_empty() { vec![0.0; n] } else { sim.x0.clone() };
        check_len("simulation.x0", &x0, n)?;
        if sim.steps == 0 {
            return Err(invalid("simulation.steps", "must be at least 1"));
        }
        if let Some(mu) = sim.mu {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(invalid("simulation.mu", "must be finite and > 0"));
            }
        }
        if !(sim.sample_time > 0.0 && sim.sample_time.is_finite()) {
            return Err(invalid("simulation.sample_time", "must be finite and > 0"));
        }
        let trajectory = match &sim.p_trajectory {
            None => ParamTrajectory::Constant { value: unc.p_hi.clone() },
            Some(TrajectorySpec::Constant { value }) => {
                check_len("simulation.p_trajectory.value", value, q)?;
                ParamTrajectory::Constant { value: value.clone() }
            }
            Some(TrajectorySpec::Ramp { from, to }) => {
                check_len("simulation.p_trajectory.from", from, q)?;
                check_len("simulation.p_trajectory.to", to, q)?;
                ParamTrajectory::Ramp {
                    from: from.clone(),
                    to: to.clone(),
                }
            }
            Some(TrajectorySpec::Sequence { values }) => {
                if values.is_empty() {
                    return Err(invalid("simulation.p_trajectory.values", "must be non-empty"));
                }
                for (i, v) in values.iter().enumerate() {
                    check_len(&format!("simulation.p_trajectory.values[{i}]"), v, q)?;
                }
                ParamTrajectory::Sequence { values: values.clone() }
            }
            Some(TrajectorySpec::UniformRandom) => ParamTrajectory::UniformRandom { seed: sim.seed },
        };
        if self.audit.grid_points < 2 {
            return Err(invalid("audit.grid_points", "must be at least 2"));
        }
        for (field, name) in [
            ("output.synthesis", &self.output.synthesis),
            ("output.trace", &self.output.trace),
            ("output.compare", &self.output.compare),
            ("output.verify", &self.output.verify),
        ] {
            if name.is_empty() || name.contains(['/', '\\']) {
                return Err(invalid(field, "must be a plain file name"));
            }
        }

        let plant = Plant::new(sys.a.clone(), sys.b.clone(), model).map_err(|e| invalid("system", e.to_string()))?;
        Ok(Experiment {
            plant,
            params,
            design: pb.design,
            matched,
            x0,
            steps: sim.steps,
            policy: sim.policy,
            mu_override: sim.mu,
            trajectory,
            seed: sim.seed,
            sample_time: sim.sample_time,
            audit: self.audit.clone(),
            output: self.output.clone(),
        })
    }
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 5] = ["paper", "paper-restricted", "feasible", "scalar", "golden"];

fn m(rows: &[&[f64]]) -> Matrix {
    Matrix::from_rows(rows).expect("preset matrices are rectangular")
}

fn base(
    system: SystemBlock,
    params: ParamsBlock,
    simulation: SimulationBlock,
) -> ExperimentConfig {
    ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        system,
        params,
        simulation,
        audit: AuditBlock::default(),
        output: OutputBlock::default(),
    }
}

fn benchmark_config(p_hi: f64, trajectory: TrajectorySpec) -> ExperimentConfig {
    base(
        SystemBlock {
            a: m(&[&[0.0, 1.0], &[1.0, 0.0]]),
            b: m(&[&[0.0], &[1.0]]),
            uncertainty: UncertaintyBlock {
                basis: vec![m(&[&[1.0, 1.0], &[0.0, 0.0]])],
                p_lo: vec![0.0],
                p_hi: vec![p_hi],
            },
            f: Matrix::filled(2, 2, 6.09),
        },
        ParamsBlock {
            q: Matrix::identity(2),
            r1: Matrix::identity(1),
            r2: Matrix::identity(2),
            alpha: 10.0,
            beta: 5.0,
            epsilon: 0.1,
            sigma: 0.1,
            design: DesignKind::Mismatched,
        },
        SimulationBlock {
            x0: vec![1.0, -1.0],
            mu: Some(0.29),
            p_trajectory: Some(trajectory),
            ..SimulationBlock::default()
        },
    )
}

/// Built-in configurations.
///
/// * `paper`: the two-state benchmark with `p` in `[0, 0.8]`, constant
///   `p = 0.8`, and the published trigger coefficient `mu = 0.29`.
/// * `paper-restricted`: same plant with `p` drawn from `[0, 0.7]`.
/// * `feasible`: a two-state plant on which every audited condition holds.
/// * `scalar`: `x+ = x + u` with `beta = 1`, a feasible scalar design.
/// * `golden`: `x+ = x + u` with `beta = 0`, whose Riccati solution is the
///   golden ratio and whose trigger weight is indefinite.
pub fn preset(name: &str) -> Result<ExperimentConfig, ConfigError> {
    Ok(match name {
        "paper" => benchmark_config(0.8, TrajectorySpec::Constant { value: vec![0.8] }),
        "paper-restricted" => benchmark_config(0.7, TrajectorySpec::UniformRandom),
        "feasible" => base(
            SystemBlock {
                a: m(&[&[-0.2, 0.0], &[0.4, 1.1]]),
                b: m(&[&[0.0], &[1.0]]),
                uncertainty: UncertaintyBlock {
                    basis: vec![m(&[&[1.0, 0.0], &[0.0, 0.0]])],
                    p_lo: vec![0.0],
                    p_hi: vec![0.07],
                },
                f: Matrix::identity(2),
            },
            ParamsBlock {
                q: Matrix::identity(2),
                r1: Matrix::identity(1),
                r2: Matrix::identity(2).scale(10.0),
                alpha: 0.5,
                beta: 2.0,
                epsilon: 0.1,
                sigma: 0.1,
                design: DesignKind::Mismatched,
            },
            SimulationBlock {
                x0: vec![1.0, -1.0],
                p_trajectory: Some(TrajectorySpec::UniformRandom),
                ..SimulationBlock::default()
            },
        ),
        "scalar" | "golden" => {
            let (beta, epsilon) = if name == "scalar" { (1.0, 0.2) } else { (0.0, 0.1) };
            base(
                SystemBlock {
                    a: m(&[&[1.0]]),
                    b: m(&[&[1.0]]),
                    uncertainty: UncertaintyBlock {
                        basis: Vec::new(),
                        p_lo: Vec::new(),
                        p_hi: Vec::new(),
                    },
                    f: m(&[&[0.0]]),
                },
                ParamsBlock {
                    q: m(&[&[1.0]]),
                    r1: m(&[&[1.0]]),
                    r2: m(&[&[1.0]]),
                    alpha: 0.0,
                    beta,
                    epsilon,
                    sigma: 0.1,
                    design: DesignKind::Mismatched,
                },
                SimulationBlock {
                    x0: vec![1.0],
                    p_trajectory: Some(TrajectorySpec::Constant { value: Vec::new() }),
                    ..SimulationBlock::default()
                },
            )
        }
        other => return Err(ConfigError::UnknownPreset(other.to_string())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(back, cfg, "{name}");
        }
        assert!(matches!(preset("nope"), Err(ConfigError::UnknownPreset(_))));
    }

    #[test]
    fn defaults_fill_in() {
        let mut v: serde_json::Value = serde_json::from_str(&preset("paper").unwrap().to_json()).unwrap();
        v.as_object_mut().unwrap().remove("simulation");
        v.as_object_mut().unwrap().remove("output");
        let cfg: ExperimentConfig = serde_json::from_value(v).unwrap();
        assert_eq!(cfg.simulation.steps, 20);
        assert_eq!(cfg.simulation.seed, 0);
        assert_eq!(cfg.simulation.policy, PolicyKind::Event);
        assert_eq!(cfg.output.trace, "trace.csv");
        let exp = cfg.validate().unwrap();
        assert_eq!(exp.x0, vec![0.0, 0.0]);
        assert_eq!(exp.trajectory, ParamTrajectory::Constant { value: vec![0.8] });
    }

    #[test]
    fn errors_name_the_field() {
        let mut cfg = preset("paper").unwrap();
        cfg.system.b = Matrix::zeros(3, 1);
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("system.b"), "{err}");

        let mut cfg = preset("paper").unwrap();
        cfg.params.r1 = Matrix::identity(2);
        assert!(cfg.validate().unwrap_err().to_string().contains("params.r1"));

        let mut cfg = preset("paper").unwrap();
        cfg.simulation.x0 = vec![1.0];
        assert!(cfg.validate().unwrap_err().to_string().contains("simulation.x0"));

        let mut cfg = preset("paper").unwrap();
        cfg.schema_version = 7;
        assert!(cfg.validate().unwrap_err().to_string().contains("schema_version"));
    }

    #[test]
    fn a_gain_field_is_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&preset("paper").unwrap().to_json()).unwrap();
        v["params"]["k"] = serde_json::json!([[0.0, 0.0]]);
        let err = serde_json::from_value::<ExperimentConfig>(v).unwrap_err().to_string();
        assert!(err.contains("unknown field `k`"), "{err}");
    }

    #[test]
    fn ragged_matrix_is_a_parse_error() {
        let text = preset("paper").unwrap().to_json().replacen("[\n        0.0,\n        1.0\n      ]", "[0.0]", 1);
        assert!(matches!(ExperimentConfig::from_json(&text), Err(ConfigError::Parse(_))));
    }
}
