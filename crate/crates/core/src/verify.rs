//! Numerical checkers for the matrix inequalities behind the stability
//! argument.
//!
//! Every PSD-order check evaluates `lambda_min` of a slack matrix and
//! accepts it down to `-1e-8 (1 + |slack|_2)`. All inverses here are formed
//! directly (`P^{-1}` first, then the outer inverse), independently of the
//! rearranged forms used in [`crate::synthesis`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::matrix::{inverse, is_positive_definite, norm2_sq, spectral_norm, sym_eigvals, Matrix, MatrixError};
use crate::sim::SimTrace;
use crate::synthesis::{input_weight, SynthesisOutcome, SynthesisParams, UncertaintyModel};

/// Relative tolerance of the PSD-order checks.
pub const PSD_REL_TOL: f64 = 1e-8;
/// Relative tolerance of the inversion identity.
pub const IDENTITY_REL_TOL: f64 = 1e-8;
/// Default sample count of the random campaigns.
pub const DEFAULT_SAMPLES: usize = 1000;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("trace row {0} carries no Lyapunov value")]
    MissingLyapunov(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Offending input of a failed check.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// Trace step.
    Step { k: usize },
    /// Uncertain parameter value.
    Parameter { p: Vec<f64> },
    /// Random campaign sample, reproducible from the root seed.
    Sample { index: usize, root_seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub holds: bool,
    /// Smallest slack eigenvalue, worst per-step slack, or largest residual.
    pub margin: f64,
    /// Margin accepted as passing: `margin >= -tolerance` for slacks,
    /// `margin <= tolerance` for residuals.
    pub tolerance: f64,
    pub witness: Option<Witness>,
}

fn psd_check(name: &str, slack: &Matrix, witness: Option<Witness>) -> Result<CheckResult, VerifyError> {
    let sym = slack.symmetric_part();
    let margin = sym_eigvals(&sym)?[0];
    let tolerance = PSD_REL_TOL * (1.0 + spectral_norm(&sym));
    let holds = margin >= -tolerance;
    Ok(CheckResult {
        name: name.to_string(),
        holds,
        margin,
        tolerance,
        witness: if holds { None } else { witness },
    })
}

fn require_pd(m: &Matrix, what: &str) -> Result<(), VerifyError> {
    let sym = m.symmetric_part();
    if m.symmetry_defect() > 1e-9 * (1.0 + m.max_abs()) || !is_positive_definite(&sym, 0.0)? {
        return Err(VerifyError::Precondition(format!("{what} must be symmetric positive definite")));
    }
    Ok(())
}

fn inv_eps_gap(p: &Matrix, eps: f64) -> Matrix {
    &Matrix::identity(p.rows()).scale(1.0 / eps) - p
}

/// `(P^{-1} - eps I)^{-1} = P + P (eps^-1 I - P)^{-1} P`.
///
/// Holds iff the max-entry residual is at most `1e-8 |P|_2`.
pub fn check_inversion_identity(p: &Matrix, epsilon: f64) -> Result<CheckResult, VerifyError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(VerifyError::Precondition(format!("epsilon = {epsilon} must be > 0")));
    }
    require_pd(p, "P")?;
    let gap = inv_eps_gap(p, epsilon);
    require_pd(&gap, "eps^-1 I - P")?;
    let n = p.rows();
    let lhs = inverse(&(&inverse(p)? - &Matrix::identity(n).scale(epsilon)))?;
    let rhs = p + &(&(p * &inverse(&gap)?) * p);
    let residual = (&lhs - &rhs).max_abs();
    let tolerance = IDENTITY_REL_TOL * spectral_norm(p);
    Ok(CheckResult {
        name: "inversion_identity".into(),
        holds: residual <= tolerance,
        margin: residual,
        tolerance,
        witness: None,
    })
}

/// Cross-term bound for the perturbed closed loop:
/// `Ac^T P dA + dA^T P Ac + dA^T P dA <= Ac^T P (eps^-1 I - P)^{-1} P Ac + eps^-1 dA^T dA`.
pub fn check_lemma1(p: &Matrix, epsilon: f64, ac: &Matrix, delta_a: &Matrix) -> Result<CheckResult, VerifyError> {
    let n = p.rows();
    if ac.shape() != (n, n) || delta_a.shape() != (n, n) {
        return Err(VerifyError::Dimension(format!("Ac and dA must be {n}x{n}")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(VerifyError::Precondition(format!("epsilon = {epsilon} must be > 0")));
    }
    let gap = inv_eps_gap(p, epsilon);
    require_pd(&gap, "eps^-1 I - P")?;
    let act = ac.transpose();
    let dat = delta_a.transpose();
    let pda = p * delta_a;
    let lhs = &(&(&act * &pda) + &(&pda.transpose() * ac)) + &(&dat * &pda);
    let rhs = &(&(&(&act * p) * &inverse(&gap)?) * &(p * ac)) + &(&dat * delta_a).scale(1.0 / epsilon);
    psd_check("lemma1", &(&rhs - &lhs), None)
}

/// Riccati-side bound:
/// `Ac^T Z Ac - A^T S^{-1} A <= Ac^T (P^{-1} - eps I)^{-1} Ac - (L^T R2 L + K^T R1 K)`.
pub fn check_lemma2(
    a: &Matrix,
    b: &Matrix,
    p: &Matrix,
    params: &SynthesisParams,
    k: &Matrix,
    l: &Matrix,
    z: &Matrix,
) -> Result<CheckResult, VerifyError> {
    let n = a.rows();
    let m = b.cols();
    if p.shape() != (n, n) || z.shape() != (n, n) || k.shape() != (m, n) || l.shape() != (n, n) {
        return Err(VerifyError::Dimension("P, Z, L must be n x n and K m x n".into()));
    }
    require_pd(p, "P")?;
    require_pd(&inv_eps_gap(p, params.epsilon()), "eps^-1 I - P")?;
    let eye = Matrix::identity(n);
    let p_inv = inverse(p)?;
    let w = input_weight(b, params).map_err(|e| VerifyError::Precondition(e.to_string()))?;
    let s_inv = inverse(&(&p_inv + &w))?;
    let kernel = inverse(&(&p_inv - &eye.scale(params.epsilon())))?;
    let ac = a + &(b * k);
    let act = ac.transpose();
    let lhs = &(&(&act * z) * &ac) - &(&(&a.transpose() * &s_inv) * a);
    let costs = &(&(&l.transpose() * params.r2()) * l) + &(&(&k.transpose() * params.r1()) * k);
    let rhs = &(&(&act * &kernel) * &ac) - &costs;
    psd_check("lemma2", &(&rhs - &lhs), None)
}

/// Matrices the dissipation check needs.
#[derive(Debug, Clone, Copy)]
pub struct DissipationInputs<'a> {
    pub p: &'a Matrix,
    pub q1: &'a Matrix,
    /// `K^T B^T Z B K`.
    pub m_e: &'a Matrix,
    pub sigma: f64,
}

/// Restricts the Lyapunov-difference bound to steps whose parameter
/// satisfies `dA^T Z dA <= F`.
#[derive(Debug, Clone, Copy)]
pub struct DissipationGate<'a> {
    pub model: &'a UncertaintyModel,
    pub z: &'a Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipationReport {
    /// `dV <= -x^T Q1 x + e^T M_e e` on the gated steps.
    pub bound: CheckResult,
    /// `dV <= -(1 - sigma) lambda_min(Q1) |x|^2` on every step.
    pub contraction: CheckResult,
    /// Where `|e|^2 <= mu1 |x|^2`, the first bound is no weaker than the second.
    pub consistency: CheckResult,
    /// `lambda_min(P) |x|^2 <= V <= lambda_max(P) |x|^2`.
    pub sandwich: CheckResult,
    /// Steps skipped by the gate.
    pub ungated_steps: Vec<usize>,
    pub lambda_min_q1: f64,
    pub mu1: Option<f64>,
}

impl DissipationReport {
    pub fn holds(&self) -> bool {
        self.bound.holds && self.contraction.holds && self.consistency.holds && self.sandwich.holds
    }

    pub fn checks(&self) -> [&CheckResult; 4] {
        [&self.bound, &self.contraction, &self.consistency, &self.sandwich]
    }
}

// Tracks the worst per-step slack (`>= 0` means the step passes).
struct Worst {
    name: &'static str,
    margin: f64,
    at: Option<usize>,
    failed: bool,
}

impl Worst {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            margin: f64::INFINITY,
            at: None,
            failed: false,
        }
    }

    fn record(&mut self, k: usize, slack: f64) {
        if slack < 0.0 || slack.is_nan() {
            if !self.failed {
                self.at = Some(k);
            }
            self.failed = true;
        }
        if slack < self.margin || slack.is_nan() {
            self.margin = slack;
            if !self.failed {
                self.at = Some(k);
            }
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name.into(),
            holds: !self.failed,
            margin: if self.margin.is_infinite() { 0.0 } else { self.margin },
            tolerance: 0.0,
            witness: if self.failed {
                self.at.map(|k| Witness::Step { k })
            } else {
                None
            },
        }
    }
}

/// Checks the Lyapunov difference along a trace with every step gated in.
pub fn check_dissipation(trace: &SimTrace, inputs: &DissipationInputs<'_>) -> Result<DissipationReport, VerifyError> {
    check_dissipation_gated(trace, inputs, None)
}

/// Per-step slacks include `tol = 1e-8 (1 + V(k))`, so a reported margin
/// `>= 0` means the step passes.
pub fn check_dissipation_gated(
    trace: &SimTrace,
    inputs: &DissipationInputs<'_>,
    gate: Option<DissipationGate<'_>>,
) -> Result<DissipationReport, VerifyError> {
    let n = inputs.p.rows();
    for m in [inputs.q1, inputs.m_e] {
        if m.shape() != (n, n) {
            return Err(VerifyError::Dimension(format!("Q1 and M_e must be {n}x{n}")));
        }
    }
    let mut v = Vec::with_capacity(trace.steps.len());
    for s in &trace.steps {
        if s.x.len() != n {
            return Err(VerifyError::Dimension(format!("trace state has {} entries, P is {n}x{n}", s.x.len())));
        }
        v.push(s.v.ok_or(VerifyError::MissingLyapunov(s.k))?);
    }
    let p_eigs = sym_eigvals(&inputs.p.symmetric_part())?;
    let (p_min, p_max) = (p_eigs[0], p_eigs[n - 1]);
    let lambda_min_q1 = sym_eigvals(&inputs.q1.symmetric_part())?[0];
    let me_norm = spectral_norm(inputs.m_e);
    let mu1 = (lambda_min_q1 > 0.0 && me_norm > 0.0).then(|| inputs.sigma * lambda_min_q1 / me_norm);
    let gate_f = gate.map(|g| g.model.bound().symmetric_part());

    let mut bound = Worst::new("dissipation_bound");
    let mut contraction = Worst::new("dissipation_contraction");
    let mut consistency = Worst::new("dissipation_consistency");
    let mut sandwich = Worst::new("iss_sandwich");
    let mut ungated_steps = Vec::new();

    for (i, s) in trace.steps.iter().enumerate() {
        let x2 = norm2_sq(&s.x);
        let tol = PSD_REL_TOL * (1.0 + v[i].abs());
        sandwich.record(s.k, (v[i] - p_min * x2 + tol).min(p_max * x2 - v[i] + tol));

        let Some(&v_next) = v.get(i + 1) else { break };
        let dv = v_next - v[i];
        let contract = -(1.0 - inputs.sigma) * lambda_min_q1 * x2;
        contraction.record(s.k, contract + tol - dv);

        let a_bound = -inputs.q1.quad_form(&s.x) + inputs.m_e.quad_form(&s.error);
        if let Some(mu1) = mu1 {
            if norm2_sq(&s.error) <= mu1 * x2 {
                consistency.record(s.k, contract + tol - a_bound);
            }
        }

        let gated_in = match (gate, &gate_f) {
            (Some(g), Some(f)) => {
                let da = g.model.delta_a(&s.p).map_err(|e| VerifyError::Precondition(e.to_string()))?;
                let slack = f - &(&(&da.transpose() * g.z) * &da);
                psd_check("gate", &slack, None)?.holds
            }
            _ => true,
        };
        if gated_in {
            bound.record(s.k, a_bound + tol - dv);
        } else {
            ungated_steps.push(s.k);
        }
    }

    Ok(DissipationReport {
        bound: bound.finish(),
        contraction: contraction.finish(),
        consistency: consistency.finish(),
        sandwich: sandwich.finish(),
        ungated_steps,
        lambda_min_q1,
        mu1,
    })
}

/// Outcome of a seeded random campaign.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignResult {
    pub name: String,
    pub root_seed: u64,
    pub samples: usize,
    pub failures: usize,
    /// Worst margin in the orientation of the underlying check.
    pub worst_margin: f64,
    pub first_failure: Option<Witness>,
}

impl CampaignResult {
    pub fn holds(&self) -> bool {
        self.failures == 0
    }
}

// Sample `i` uses stream `i` of the root generator.
fn sample_rng(root_seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root_seed);
    rng.set_stream(index as u64);
    rng
}

fn random_orthogonal<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    loop {
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut ok = true;
        for _ in 0..n {
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for _ in 0..2 {
                for c in &cols {
                    let d: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(c).for_each(|(a, b)| *a -= d * b);
                }
            }
            let norm = norm2_sq(&v).sqrt();
            if norm < 1e-3 {
                ok = false;
                break;
            }
            v.iter_mut().for_each(|a| *a /= norm);
            cols.push(v);
        }
        if ok {
            let mut q = Matrix::zeros(n, n);
            for (j, c) in cols.iter().enumerate() {
                for (i, val) in c.iter().enumerate() {
                    q[(i, j)] = *val;
                }
            }
            return q;
        }
    }
}

/// Random `(P, eps)` with `n` in 1..=5 and spectrum of `P` inside
/// `[0.01, 0.95] eps^-1`.
pub fn random_margin_pair<R: Rng>(rng: &mut R) -> (Matrix, f64) {
    let n = rng.gen_range(1..=5);
    let epsilon = 10f64.powf(rng.gen_range(-2.0..1.0));
    let eigs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.95) / epsilon).collect();
    let q = random_orthogonal(rng, n);
    let p = (&(&q * &Matrix::diag(&eigs)) * &q.transpose()).symmetric_part();
    (p, epsilon)
}

fn random_matrix<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Matrix {
    let data = (0..n * n).map(|_| rng.gen_range(-scale..scale)).collect();
    Matrix::from_row_major(n, n, data).expect("n*n entries")
}

fn run_campaign(
    name: &str,
    samples: usize,
    root_seed: u64,
    residual: bool,
    mut one: impl FnMut(&mut ChaCha8Rng) -> Result<CheckResult, VerifyError>,
) -> Result<CampaignResult, VerifyError> {
    let mut failures = 0;
    let mut worst = if residual { 0.0 } else { f64::INFINITY };
    let mut first_failure = None;
    for index in 0..samples {
        let res = one(&mut sample_rng(root_seed, index))?;
        worst = if residual { f64::max(worst, res.margin) } else { f64::min(worst, res.margin) };
        if !res.holds {
            failures += 1;
            first_failure.get_or_insert(Witness::Sample { index, root_seed });
        }
    }
    Ok(CampaignResult {
        name: name.into(),
        root_seed,
        samples,
        failures,
        worst_margin: worst,
        first_failure,
    })
}

/// Inversion identity on random `(P, eps)` pairs.
pub fn identity_campaign(samples: usize, root_seed: u64) -> Result<CampaignResult, VerifyError> {
    run_campaign("inversion_identity", samples, root_seed, true, |rng| {
        let (p, eps) = random_margin_pair(rng);
        check_inversion_identity(&p, eps)
    })
}

/// First lemma on random `(P, eps, Ac, dA)`.
pub fn lemma1_campaign(samples: usize, root_seed: u64) -> Result<CampaignResult, VerifyError> {
    run_campaign("lemma1", samples, root_seed, false, |rng| {
        let (p, eps) = random_margin_pair(rng);
        let n = p.rows();
        let ac = random_matrix(rng, n, 2.0);
        let da = random_matrix(rng, n, 2.0);
        check_lemma1(&p, eps, &ac, &da)
    })
}

/// Everything `verify` reports for one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub feasibility_holds: bool,
    pub checks: Vec<CheckResult>,
    pub dissipation: Option<DissipationReport>,
    pub campaigns: Vec<CampaignResult>,
}

impl AuditReport {
    pub fn holds(&self) -> bool {
        self.feasibility_holds
            && self.checks.iter().all(|c| c.holds)
            && self.dissipation.as_ref().is_none_or(DissipationReport::holds)
            && self.campaigns.iter().all(CampaignResult::holds)
    }
}

/// Instance the audit runs on.
#[derive(Debug, Clone, Copy)]
pub struct AuditInstance<'a> {
    pub a: &'a Matrix,
    pub b: &'a Matrix,
    pub model: &'a UncertaintyModel,
    pub params: &'a SynthesisParams,
    pub design: &'a SynthesisOutcome,
}

/// Runs every checker on a completed synthesis, one trace and the random
/// campaigns. The first lemma is evaluated on `grid_points` samples of the
/// parameter box.
pub fn audit(
    inst: &AuditInstance<'_>,
    trace: Option<&SimTrace>,
    grid_points: usize,
    samples: usize,
    root_seed: u64,
) -> Result<AuditReport, VerifyError> {
    let d = inst.design;
    let eps = inst.params.epsilon();
    let mut checks = vec![check_inversion_identity(&d.p, eps)?];

    let mut worst: Option<CheckResult> = None;
    for p in inst.model.sample_points(grid_points) {
        let da = inst.model.delta_a(&p).map_err(|e| VerifyError::Precondition(e.to_string()))?;
        let mut r = check_lemma1(&d.p, eps, &d.ac, &da)?;
        if !r.holds {
            r.witness = Some(Witness::Parameter { p });
        }
        if worst.as_ref().is_none_or(|w| r.margin < w.margin) {
            worst = Some(r);
        }
    }
    checks.extend(worst);
    checks.push(check_lemma2(inst.a, inst.b, &d.p, inst.params, &d.k, &d.l, &d.z)?);

    let dissipation = match trace {
        Some(t) => {
            let m_e = d.error_weight(inst.b);
            let inputs = DissipationInputs {
                p: &d.p,
                q1: &d.q1,
                m_e: &m_e,
                sigma: inst.params.sigma(),
            };
            let gate = DissipationGate {
                model: inst.model,
                z: &d.z,
            };
            Some(check_dissipation_gated(t, &inputs, Some(gate))?)
        }
        None => None,
    };

    let campaigns = if samples > 0 {
        vec![identity_campaign(samples, root_seed)?, lemma1_campaign(samples, root_seed)?]
    } else {
        Vec::new()
    };

    Ok(AuditReport {
        feasibility_holds: d.report.all_hold(),
        checks,
        dissipation,
        campaigns,
    })
}
