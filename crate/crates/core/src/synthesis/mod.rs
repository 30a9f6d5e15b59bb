//! Robust state-feedback synthesis for systems with mismatched parametric
//! uncertainty, and the event-trigger coefficient that goes with it.
//!
//! The pipeline is: modified Riccati solution `P`, feedback gain `K`,
//! virtual gain `L`, the weighting matrix `Z`, the trigger weight `Q1`, the
//! trigger coefficient `mu`, and finally a [`FeasibilityReport`] listing
//! every inequality the stability argument relies on.

mod feasibility;
mod matched;
mod model;
mod riccati;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{spectral_norm, Matrix, MatrixError};

pub use feasibility::{
    feasibility_report, psd_tolerance, Condition, ConditionEntry, DesignView, FeasibilityReport,
    ReportOptions, Verdict,
};
pub use matched::{matched_feasibility_report, solve_matched_dare, synthesize_matched, synthesize_matched_with};
pub use model::{MatchedModel, SynthesisParams, UncertaintyModel};
pub use riccati::{
    compute_gain_k, compute_gain_l, input_weight, matched_input_weight, projector_complement,
    riccati_residual, s_inverse, solve_modified_dare, solve_modified_dare_with, RiccatiOptions,
    RiccatiSolution,
};

use feasibility::{min_eig_sym, perturbed_inverse};

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("Riccati iteration did not converge after {iterations} iterations (last step {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("Riccati iterate lost positive definiteness at iteration {iteration}: infeasible parameterization")]
    LostDefiniteness { iteration: usize },
    #[error(
        "condition epsilon_margin violated: eps^-1 I - P must be positive definite, \
         but lambda_min(eps^-1 I - P) = {lambda_min:.6e}"
    )]
    EpsilonMargin {
        lambda_min: f64,
        diagnosis: Option<Box<Diagnosis>>,
    },
    #[error(
        "trigger weight is not positive definite (lambda_min = {lambda_min:.6e}); \
         the trigger coefficient is undefined"
    )]
    TriggerWeightIndefinite {
        lambda_min: f64,
        diagnosis: Option<Box<Diagnosis>>,
    },
    #[error("Z is not positive definite (lambda_min = {lambda_min:e})")]
    ZNotPositive { lambda_min: f64 },
    #[error("K^T B^T Z B K vanishes: the measurement error never enters the bound and the trigger coefficient is unbounded")]
    ZeroTriggerGain { diagnosis: Option<Box<Diagnosis>> },
    #[error("uncertainty basis matrix {index} is not matched (|B B^+ E - E| = {defect:e})")]
    NotMatched { index: usize, defect: f64 },
}

impl SynthesisError {
    /// Partial results attached to a failed synthesis, if any.
    pub fn diagnosis(&self) -> Option<&Diagnosis> {
        match self {
            SynthesisError::EpsilonMargin { diagnosis, .. }
            | SynthesisError::TriggerWeightIndefinite { diagnosis, .. }
            | SynthesisError::ZeroTriggerGain { diagnosis } => diagnosis.as_deref(),
            _ => None,
        }
    }
}

/// Riccati solution and the gains derived from it, before any of the
/// epsilon-dependent quantities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainDesign {
    pub p: Matrix,
    pub k: Matrix,
    pub l: Matrix,
    /// Nominal closed loop `A + B K`.
    pub ac: Matrix,
    pub iterations: usize,
    pub residual: f64,
}

/// What was computed before a synthesis stopped.
///
/// `z` and `q1` are the literal algebraic expressions, present whenever they
/// can be formed even if the inequality that gives them meaning fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnosis {
    pub design: GainDesign,
    pub z: Option<Matrix>,
    pub q1: Option<Matrix>,
    pub report: FeasibilityReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Mismatched,
    Matched,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthesisOutcome {
    pub kind: DesignKind,
    pub p: Matrix,
    pub k: Matrix,
    /// Virtual gain; zero for the matched design.
    pub l: Matrix,
    /// Trigger kernel: `Z` for the mismatched design, `(P^{-1} - eps I)^{-1}`
    /// for the matched one.
    pub z: Matrix,
    /// Trigger weight: `Q1` for the mismatched design, `Q + F + beta^2 I`
    /// for the matched one.
    pub q1: Matrix,
    /// Trigger coefficient.
    pub mu: f64,
    pub ac: Matrix,
    pub report: FeasibilityReport,
    pub iterations: usize,
    pub residual: f64,
}

impl SynthesisOutcome {
    /// `K^T B^T Z B K`, the error weight in the Lyapunov difference bound.
    pub fn error_weight(&self, b: &Matrix) -> Matrix {
        error_weight(&self.k, b, &self.z)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SynthesisOptions {
    pub riccati: RiccatiOptions,
    pub report: ReportOptions,
}

/// Riccati solution plus `K`, `L` and `A + B K`.
pub fn design_gains(
    a: &Matrix,
    b: &Matrix,
    params: &SynthesisParams,
    f: &Matrix,
    opts: &RiccatiOptions,
) -> Result<GainDesign, SynthesisError> {
    let sol = solve_modified_dare_with(a, b, params, f, opts)?;
    let k = compute_gain_k(a, b, &sol.p, params)?;
    let l = compute_gain_l(a, b, &sol.p, params)?;
    let ac = a + &(b * &k);
    Ok(GainDesign {
        p: sol.p,
        k,
        l,
        ac,
        iterations: sol.iterations,
        residual: sol.residual,
    })
}

// eps^-1 I + P (eps^-1 I - P)^{-1} P, without any definiteness check.
fn z_expression(p: &Matrix, eps: f64) -> Option<Matrix> {
    let n = p.rows();
    let inv_eps = Matrix::identity(n).scale(1.0 / eps);
    let gap = crate::matrix::inverse(&(&inv_eps - p)).ok()?;
    Some((&inv_eps + &(&(p * &gap) * p)).symmetric_part())
}

/// `Z = eps^-1 I + P (eps^-1 I - P)^{-1} P`.
///
/// Requires `eps^-1 I - P` positive definite; `Z > 0` then follows and is
/// checked before returning.
pub fn compute_z(p: &Matrix, epsilon: f64) -> Result<Matrix, SynthesisError> {
    let n = p.rows();
    let gap = &Matrix::identity(n).scale(1.0 / epsilon) - p;
    let lambda_min = min_eig_sym(&gap)?;
    if !(lambda_min > psd_tolerance(&gap)) {
        return Err(SynthesisError::EpsilonMargin {
            lambda_min,
            diagnosis: None,
        });
    }
    let z = z_expression(p, epsilon).ok_or(SynthesisError::EpsilonMargin {
        lambda_min,
        diagnosis: None,
    })?;
    let z_min = min_eig_sym(&z)?;
    if !(z_min > 0.0) {
        return Err(SynthesisError::ZNotPositive { lambda_min: z_min });
    }
    Ok(z)
}

/// `Q1 = beta^2 I + K^T R1 K + L^T R2 L - Ac^T Z Ac`.
pub fn compute_q1(params: &SynthesisParams, k: &Matrix, l: &Matrix, ac: &Matrix, z: &Matrix) -> Matrix {
    let n = ac.rows();
    let beta2 = Matrix::identity(n).scale(params.beta() * params.beta());
    let ktrk = &(&k.transpose() * params.r1()) * k;
    let ltrl = &(&l.transpose() * params.r2()) * l;
    let aczac = &(&ac.transpose() * z) * ac;
    (&(&(&beta2 + &ktrk) + &ltrl) - &aczac).symmetric_part()
}

/// `K^T B^T Z B K`.
pub fn error_weight(k: &Matrix, b: &Matrix, z: &Matrix) -> Matrix {
    let bk = b * k;
    (&(&bk.transpose() * z) * &bk).symmetric_part()
}

/// `mu = sigma lambda_min(Q1) / |K^T B^T Z B K|`.
pub fn compute_mu1(k: &Matrix, b: &Matrix, z: &Matrix, q1: &Matrix, sigma: f64) -> Result<f64, SynthesisError> {
    let lambda_min = min_eig_sym(q1)?;
    if !(lambda_min > psd_tolerance(q1)) {
        return Err(SynthesisError::TriggerWeightIndefinite {
            lambda_min,
            diagnosis: None,
        });
    }
    let denom = spectral_norm(&error_weight(k, b, z));
    if !(denom > 0.0) {
        return Err(SynthesisError::ZeroTriggerGain { diagnosis: None });
    }
    Ok(sigma * lambda_min / denom)
}

/// Full mismatched synthesis with default options.
pub fn synthesize(
    a: &Matrix,
    b: &Matrix,
    model: &UncertaintyModel,
    params: &SynthesisParams,
) -> Result<SynthesisOutcome, SynthesisError> {
    synthesize_with(a, b, model, params, &SynthesisOptions::default())
}

/// Full mismatched synthesis.
///
/// Failed feasibility verdicts do not abort: they are carried in the
/// report. The synthesis does stop when `Z` or `mu` would be meaningless,
/// that is when `eps^-1 I - P` or `Q1` is not positive definite; the error
/// then carries a [`Diagnosis`] with everything computed so far.
pub fn synthesize_with(
    a: &Matrix,
    b: &Matrix,
    model: &UncertaintyModel,
    params: &SynthesisParams,
    opts: &SynthesisOptions,
) -> Result<SynthesisOutcome, SynthesisError> {
    if model.state_dim() != a.rows() {
        return Err(SynthesisError::Dimension(format!(
            "uncertainty model is {0}x{0}, A is {1}x{1}",
            model.state_dim(),
            a.rows()
        )));
    }
    let design = design_gains(a, b, params, model.bound(), &opts.riccati)?;
    let eps = params.epsilon();
    let z_literal = z_expression(&design.p, eps);
    let q1_literal = z_literal
        .as_ref()
        .map(|z| compute_q1(params, &design.k, &design.l, &design.ac, z));
    let report = feasibility_report(
        model,
        params,
        DesignView {
            p: &design.p,
            k: &design.k,
            l: &design.l,
            ac: &design.ac,
            z: z_literal.as_ref(),
            q1: q1_literal.as_ref(),
        },
        &opts.report,
    )?;

    let diagnose = |design: GainDesign| {
        Some(Box::new(Diagnosis {
            design,
            z: z_literal.clone(),
            q1: q1_literal.clone(),
            report: report.clone(),
        }))
    };

    let z = match compute_z(&design.p, eps) {
        Ok(z) => z,
        Err(SynthesisError::EpsilonMargin { lambda_min, .. }) => {
            return Err(SynthesisError::EpsilonMargin {
                lambda_min,
                diagnosis: diagnose(design),
            })
        }
        Err(e) => return Err(e),
    };
    let q1 = compute_q1(params, &design.k, &design.l, &design.ac, &z);
    let mu = match compute_mu1(&design.k, b, &z, &q1, params.sigma()) {
        Ok(mu) => mu,
        Err(SynthesisError::TriggerWeightIndefinite { lambda_min, .. }) => {
            return Err(SynthesisError::TriggerWeightIndefinite {
                lambda_min,
                diagnosis: diagnose(design),
            })
        }
        Err(SynthesisError::ZeroTriggerGain { .. }) => {
            return Err(SynthesisError::ZeroTriggerGain {
                diagnosis: diagnose(design),
            })
        }
        Err(e) => return Err(e),
    };

    Ok(SynthesisOutcome {
        kind: DesignKind::Mismatched,
        p: design.p,
        k: design.k,
        l: design.l,
        z,
        q1,
        mu,
        ac: design.ac,
        report,
        iterations: design.iterations,
        residual: design.residual,
    })
}

/// `n` logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo, "log_grid needs 0 < lo <= hi");
    if n <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// One point of an epsilon sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonProbe {
    pub epsilon: f64,
    /// Synthesis completed and every audited condition holds.
    pub feasible: bool,
    pub mu: Option<f64>,
    pub failing: Vec<Condition>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Runs the synthesis for each `epsilon` and records which values are feasible.
pub fn epsilon_sweep(
    a: &Matrix,
    b: &Matrix,
    model: &UncertaintyModel,
    params: &SynthesisParams,
    epsilons: &[f64],
    opts: &SynthesisOptions,
) -> Result<Vec<EpsilonProbe>, SynthesisError> {
    epsilons
        .iter()
        .map(|&epsilon| {
            let p = params.with_epsilon(epsilon)?;
            Ok(match synthesize_with(a, b, model, &p, opts) {
                Ok(out) => EpsilonProbe {
                    epsilon,
                    feasible: out.report.all_hold(),
                    mu: Some(out.mu),
                    failing: out.report.violations().map(|e| e.condition).collect(),
                    error: None,
                },
                Err(e) => EpsilonProbe {
                    epsilon,
                    feasible: false,
                    mu: None,
                    failing: e
                        .diagnosis()
                        .map(|d| d.report.violations().map(|v| v.condition).collect())
                        .unwrap_or_default(),
                    error: Some(e.to_string()),
                },
            })
        })
        .collect()
}

pub(crate) fn matched_kernel(p: &Matrix, eps: f64) -> Option<Matrix> {
    perturbed_inverse(p, eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn z_examples() {
        // 1 + 0.25 / 0.5
        let z = compute_z(&Matrix::identity(2).scale(0.5), 1.0).unwrap();
        assert!((&z - &Matrix::identity(2).scale(1.5)).max_abs() < 1e-15);

        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        let z = compute_z(&m(&[&[golden]]), 0.1).unwrap();
        let oracle = 10.0 + golden * golden / (10.0 - golden);
        assert!((z[(0, 0)] - oracle).abs() < 1e-12);
        assert!((z[(0, 0)] - 10.3123).abs() < 1e-4);
    }

    #[test]
    fn z_requires_epsilon_margin() {
        let r = compute_z(&Matrix::diag(&[1.0, 10.0]), 0.1);
        match r {
            Err(SynthesisError::EpsilonMargin { lambda_min, .. }) => assert_eq!(lambda_min, 0.0),
            other => panic!("unexpected {other:?}"),
        }
        assert!(compute_z(&Matrix::diag(&[1.0, 12.0]), 0.1)
            .unwrap_err()
            .to_string()
            .contains("epsilon_margin"));
    }

    #[test]
    fn mu_is_linear_in_sigma() {
        let k = m(&[&[-0.5, 0.2]]);
        let b = m(&[&[0.0], &[1.0]]);
        let z = Matrix::diag(&[2.0, 3.0]);
        let q1 = Matrix::diag(&[0.7, 1.3]);
        let mu = compute_mu1(&k, &b, &z, &q1, 0.1).unwrap();
        let mu3 = compute_mu1(&k, &b, &z, &q1, 0.3).unwrap();
        assert!((mu3 - 3.0 * mu).abs() <= 1e-15 * mu3);
        // |K^T B^T Z B K| = 3 |k|^2 = 3 * 0.29
        assert!((mu - 0.1 * 0.7 / (3.0 * 0.29)).abs() < 1e-15);
    }

    #[test]
    fn mu_errors() {
        let b = m(&[&[0.0], &[1.0]]);
        let z = Matrix::identity(2);
        assert!(matches!(
            compute_mu1(&Matrix::zeros(1, 2), &b, &z, &Matrix::identity(2), 0.1),
            Err(SynthesisError::ZeroTriggerGain { .. })
        ));
        assert!(matches!(
            compute_mu1(&m(&[&[1.0, 0.0]]), &b, &z, &Matrix::diag(&[1.0, -1.0]), 0.1),
            Err(SynthesisError::TriggerWeightIndefinite { .. })
        ));
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-3, 1.0, 4);
        assert_eq!(g.len(), 4);
        assert!((g[0] - 1e-3).abs() < 1e-18);
        assert!((g[1] - 1e-2).abs() < 1e-15);
        assert!((g[3] - 1.0).abs() < 1e-15);
    }
}
