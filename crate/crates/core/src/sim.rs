//! Closed-loop simulation under periodic or event-triggered transmission.
//!
//! Each step `k` of a run:
//! 1. the monitor forms `e(k) = x(k_i) - x(k)` from the last transmitted state;
//! 2. it transmits if the policy is periodic, if `k = 0`, or if
//!    `|e(k)|^2 >= mu |x(k)|^2`; a transmission sets `k_i = k`;
//! 3. the actuator holds `u = K x(k_i)`;
//! 4. the plant advances with `x(k+1) = (A + dA(p(k))) x(k) + B u`.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::matrix::{norm2, norm2_sq, Matrix};
use crate::synthesis::{SynthesisError, UncertaintyModel};

/// States whose Euclidean norm exceeds this abort the run.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid trigger coefficient {0}: must be finite and > 0")]
    InvalidMu(f64),
    #[error("a run needs at least one step")]
    NoSteps,
    #[error("invalid parameter trajectory: {0}")]
    Trajectory(String),
    #[error(transparent)]
    Model(#[from] SynthesisError),
}

/// Plant `x(k+1) = (A + dA(p)) x(k) + B u(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    a: Matrix,
    b: Matrix,
    model: UncertaintyModel,
}

impl Plant {
    pub fn new(a: Matrix, b: Matrix, model: UncertaintyModel) -> Result<Self, SimError> {
        let n = a.rows();
        if !a.is_square() || b.rows() != n || model.state_dim() != n {
            return Err(SimError::Dimension(format!(
                "A is {}x{}, B is {}x{}, uncertainty model is {d}x{d}",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols(),
                d = model.state_dim(),
            )));
        }
        Ok(Self { a, b, model })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }
    pub fn b(&self) -> &Matrix {
        &self.b
    }
    pub fn model(&self) -> &UncertaintyModel {
        &self.model
    }
    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }
    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }
}

/// `dA(p) = sum_i p_i E_i`, with `p` first clamped into the parameter box.
///
/// The flag reports whether clamping changed `p`.
pub fn build_delta_a(model: &UncertaintyModel, p: &[f64]) -> Result<(Matrix, bool), SimError> {
    if p.len() != model.param_dim() {
        return Err(SimError::Dimension(format!(
            "parameter vector has {} entries, model has {}",
            p.len(),
            model.param_dim()
        )));
    }
    let (p, clamped) = model.clamp(p);
    Ok((model.delta_a(&p)?, clamped))
}

/// Transmission rule `|x_held - x|^2 >= mu |x|^2` (boundary included).
pub fn should_trigger(x: &[f64], x_held: &[f64], mu: f64) -> bool {
    let err: f64 = x_held.iter().zip(x).map(|(h, v)| (h - v) * (h - v)).sum();
    err >= mu * norm2_sq(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TriggerPolicy {
    Periodic,
    Event { mu: f64 },
}

impl TriggerPolicy {
    pub fn event(mu: f64) -> Result<Self, SimError> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(SimError::InvalidMu(mu));
        }
        Ok(TriggerPolicy::Event { mu })
    }

    pub fn mu(&self) -> Option<f64> {
        match self {
            TriggerPolicy::Periodic => None,
            TriggerPolicy::Event { mu } => Some(*mu),
        }
    }
}

/// How the uncertain parameter evolves over a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamTrajectory {
    Constant { value: Vec<f64> },
    /// Linear from `from` at `k = 0` to `to` at the final step.
    Ramp { from: Vec<f64>, to: Vec<f64> },
    /// Explicit values; the last one is held if the run is longer.
    Sequence { values: Vec<Vec<f64>> },
    /// Independent uniform draws from the parameter box.
    UniformRandom { seed: u64 },
}

/// Parameter values for steps `0..=steps` plus the steps that were clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSchedule {
    pub values: Vec<Vec<f64>>,
    pub clamped_steps: Vec<usize>,
}

impl ParamTrajectory {
    pub fn schedule(&self, model: &UncertaintyModel, steps: usize) -> Result<ParamSchedule, SimError> {
        let q = model.param_dim();
        let check = |v: &[f64], what: &str| {
            if v.len() != q {
                Err(SimError::Trajectory(format!(
                    "{what} has {} entries, the model has {q} parameters",
                    v.len()
                )))
            } else {
                Ok(())
            }
        };
        let raw: Vec<Vec<f64>> = match self {
            ParamTrajectory::Constant { value } => {
                check(value, "constant value")?;
                vec![value.clone(); steps + 1]
            }
            ParamTrajectory::Ramp { from, to } => {
                check(from, "ramp start")?;
                check(to, "ramp end")?;
                (0..=steps)
                    .map(|k| {
                        let s = if steps == 0 { 0.0 } else { k as f64 / steps as f64 };
                        from.iter().zip(to).map(|(a, b)| a + (b - a) * s).collect()
                    })
                    .collect()
            }
            ParamTrajectory::Sequence { values } => {
                let last = values
                    .last()
                    .ok_or_else(|| SimError::Trajectory("empty sequence".into()))?;
                for v in values {
                    check(v, "sequence entry")?;
                }
                (0..=steps)
                    .map(|k| values.get(k).unwrap_or(last).clone())
                    .collect()
            }
            ParamTrajectory::UniformRandom { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..=steps)
                    .map(|_| {
                        model
                            .p_lo()
                            .iter()
                            .zip(model.p_hi())
                            .map(|(lo, hi)| if lo < hi { rng.gen_range(*lo..=*hi) } else { *lo })
                            .collect()
                    })
                    .collect()
            }
        };
        let mut values = Vec::with_capacity(raw.len());
        let mut clamped_steps = Vec::new();
        for (k, p) in raw.into_iter().enumerate() {
            let (c, moved) = model.clamp(&p);
            if moved {
                clamped_steps.push(k);
            }
            values.push(c);
        }
        Ok(ParamSchedule {
            values,
            clamped_steps,
        })
    }
}

/// One row of a trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimStep {
    pub k: usize,
    pub x: Vec<f64>,
    /// Input held by the actuator during this step.
    pub u: Vec<f64>,
    /// `x(k_i) - x(k)` after any transmission at this step.
    pub error: Vec<f64>,
    /// `|x(k_i) - x(k)|^2` as seen by the monitor, before deciding.
    pub monitored_error_sq: f64,
    /// `mu |x(k)|^2` for the event policy, `0` for the periodic one.
    pub threshold: f64,
    pub triggered: bool,
    pub p: Vec<f64>,
    /// `x^T P x`, when a Lyapunov matrix was supplied.
    pub v: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimTrace {
    pub policy: TriggerPolicy,
    pub steps: Vec<SimStep>,
    pub transmissions: usize,
    pub inter_event_gaps: Vec<usize>,
    pub clamped_steps: Vec<usize>,
    pub diverged: bool,
    /// Sampling interval used for the time column; no effect on the dynamics.
    pub sample_time: f64,
}

/// Inputs shared by every run on one plant.
#[derive(Debug, Clone, Copy)]
pub struct LoopSetup<'a> {
    pub plant: &'a Plant,
    pub gain: &'a Matrix,
    /// Lyapunov matrix used to fill `SimStep::v`.
    pub lyapunov: Option<&'a Matrix>,
    pub sample_time: f64,
}

impl<'a> LoopSetup<'a> {
    pub fn new(plant: &'a Plant, gain: &'a Matrix) -> Self {
        Self {
            plant,
            gain,
            lyapunov: None,
            sample_time: 1.0,
        }
    }

    pub fn with_lyapunov(mut self, p: &'a Matrix) -> Self {
        self.lyapunov = Some(p);
        self
    }

    fn validate(&self, x0: &[f64], steps: usize) -> Result<(), SimError> {
        let n = self.plant.state_dim();
        let m = self.plant.input_dim();
        if steps == 0 {
            return Err(SimError::NoSteps);
        }
        if self.gain.shape() != (m, n) {
            return Err(SimError::Dimension(format!(
                "gain is {}x{}, expected {m}x{n}",
                self.gain.rows(),
                self.gain.cols()
            )));
        }
        if x0.len() != n {
            return Err(SimError::Dimension(format!("x0 has {} entries, expected {n}", x0.len())));
        }
        if let Some(p) = self.lyapunov {
            if p.shape() != (n, n) {
                return Err(SimError::Dimension(format!("Lyapunov matrix must be {n}x{n}")));
            }
        }
        Ok(())
    }
}

/// Runs the loop for `k = 0..=steps` (so `steps + 1` rows).
pub fn simulate(
    setup: &LoopSetup<'_>,
    policy: &TriggerPolicy,
    trajectory: &ParamTrajectory,
    x0: &[f64],
    steps: usize,
) -> Result<SimTrace, SimError> {
    setup.validate(x0, steps)?;
    if let TriggerPolicy::Event { mu } = policy {
        if !(*mu > 0.0 && mu.is_finite()) {
            return Err(SimError::InvalidMu(*mu));
        }
    }
    let plant = setup.plant;
    let schedule = trajectory.schedule(plant.model(), steps)?;

    let mut x = x0.to_vec();
    let mut held = x.clone();
    let mut u = setup.gain.mul_vec(&held);
    let mut rows = Vec::with_capacity(steps + 1);
    let mut transmit_at = Vec::new();
    let mut diverged = false;

    for k in 0..=steps {
        let monitored: f64 = held.iter().zip(&x).map(|(h, v)| (h - v) * (h - v)).sum();
        let (threshold, fire) = match policy {
            TriggerPolicy::Periodic => (0.0, true),
            TriggerPolicy::Event { mu } => {
                let threshold = mu * norm2_sq(&x);
                (threshold, monitored >= threshold)
            }
        };
        let triggered = k == 0 || fire;
        if triggered {
            held.clone_from(&x);
            u = setup.gain.mul_vec(&held);
            transmit_at.push(k);
        }
        let error: Vec<f64> = held.iter().zip(&x).map(|(h, v)| h - v).collect();
        let p = schedule.values[k].clone();
        rows.push(SimStep {
            k,
            x: x.clone(),
            u: u.clone(),
            error,
            monitored_error_sq: monitored,
            threshold,
            triggered,
            v: setup.lyapunov.map(|lp| lp.quad_form(&x)),
            p,
        });
        if k == steps {
            break;
        }
        let da = plant.model().delta_a(&schedule.values[k])?;
        let a_k = plant.a() + &da;
        let drift = a_k.mul_vec(&x);
        let push = plant.b().mul_vec(&u);
        x = drift.iter().zip(&push).map(|(d, b)| d + b).collect();
        let nx = norm2(&x);
        if !(nx <= DIVERGENCE_NORM) {
            diverged = true;
            break;
        }
    }

    let inter_event_gaps = transmit_at.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(SimTrace {
        policy: *policy,
        transmissions: transmit_at.len(),
        steps: rows,
        inter_event_gaps,
        clamped_steps: schedule.clamped_steps,
        diverged,
        sample_time: setup.sample_time,
    })
}

/// Headline numbers of one trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSummary {
    pub rows: usize,
    pub transmissions: usize,
    pub initial_norm: f64,
    pub final_norm: f64,
    /// `|x(N)| / |x(0)|`, absent when `x(0) = 0`.
    pub norm_ratio: Option<f64>,
    /// Geometric mean per-step contraction of `|x|`.
    pub decay_rate: Option<f64>,
    pub initial_v: Option<f64>,
    pub final_v: Option<f64>,
    pub min_gap: Option<usize>,
    pub mean_gap: Option<f64>,
    pub max_gap: Option<usize>,
    pub diverged: bool,
}

impl SimTrace {
    pub fn summary(&self) -> TraceSummary {
        let first = self.steps.first().expect("a trace has at least one row");
        let last = self.steps.last().expect("a trace has at least one row");
        let initial_norm = norm2(&first.x);
        let final_norm = norm2(&last.x);
        let norm_ratio = (initial_norm > 0.0).then(|| final_norm / initial_norm);
        let decay_rate = norm_ratio
            .filter(|_| last.k > 0)
            .map(|r| r.powf(1.0 / last.k as f64));
        let gaps = &self.inter_event_gaps;
        TraceSummary {
            rows: self.steps.len(),
            transmissions: self.transmissions,
            initial_norm,
            final_norm,
            norm_ratio,
            decay_rate,
            initial_v: first.v,
            final_v: last.v,
            min_gap: gaps.iter().copied().min(),
            mean_gap: (!gaps.is_empty()).then(|| gaps.iter().sum::<usize>() as f64 / gaps.len() as f64),
            max_gap: gaps.iter().copied().max(),
            diverged: self.diverged,
        }
    }

    pub fn final_state(&self) -> &[f64] {
        &self.steps.last().expect("a trace has at least one row").x
    }

    /// Column names of the CSV form.
    pub fn csv_header(&self) -> Vec<String> {
        let row = &self.steps[0];
        let mut cols = vec!["k".to_string(), "t".to_string()];
        cols.extend((1..=row.x.len()).map(|i| format!("x_{i}")));
        cols.extend((1..=row.u.len()).map(|i| format!("u_{i}")));
        cols.extend(["e_norm_sq", "threshold", "triggered"].map(String::from));
        if row.p.len() == 1 {
            cols.push("p".into());
        } else {
            cols.extend((1..=row.p.len()).map(|i| format!("p_{i}")));
        }
        cols.push("V".into());
        cols
    }

    /// Writes the trace as CSV with 12 significant digits per real value.
    ///
    /// `e_norm_sq` is the monitored error, so on every row of an event
    /// policy trace `triggered = 1` exactly when `e_norm_sq >= threshold`
    /// (row 0 always transmits).
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", self.csv_header().join(","))?;
        for s in &self.steps {
            let mut cells = vec![s.k.to_string(), fmt_real(s.k as f64 * self.sample_time)];
            cells.extend(s.x.iter().map(|v| fmt_real(*v)));
            cells.extend(s.u.iter().map(|v| fmt_real(*v)));
            cells.push(fmt_real(s.monitored_error_sq));
            cells.push(fmt_real(s.threshold));
            cells.push(if s.triggered { "1" } else { "0" }.to_string());
            cells.extend(s.p.iter().map(|v| fmt_real(*v)));
            cells.push(s.v.map(fmt_real).unwrap_or_default());
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Scientific notation with 12 significant digits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.11e}")
}

/// Side-by-side run of both policies on the same parameter schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyComparison {
    pub mu: f64,
    pub periodic: TraceSummary,
    pub event: TraceSummary,
    /// `1 - event transmissions / periodic transmissions`.
    pub savings_ratio: f64,
    #[serde(skip)]
    pub periodic_trace: SimTrace,
    #[serde(skip)]
    pub event_trace: SimTrace,
}

pub fn compare_policies(
    setup: &LoopSetup<'_>,
    mu: f64,
    trajectory: &ParamTrajectory,
    x0: &[f64],
    steps: usize,
) -> Result<PolicyComparison, SimError> {
    let event_policy = TriggerPolicy::event(mu)?;
    let periodic_trace = simulate(setup, &TriggerPolicy::Periodic, trajectory, x0, steps)?;
    let event_trace = simulate(setup, &event_policy, trajectory, x0, steps)?;
    let savings_ratio = 1.0 - event_trace.transmissions as f64 / periodic_trace.transmissions as f64;
    Ok(PolicyComparison {
        mu,
        periodic: periodic_trace.summary(),
        event: event_trace.summary(),
        savings_ratio,
        periodic_trace,
        event_trace,
    })
}
