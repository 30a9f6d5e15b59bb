//! Reduced design for uncertainty lying in the range of `B`.
//!
//! Without a mismatched component the virtual input is dropped and the
//! Riccati equation loses its `alpha` term. The trigger coefficient uses
//! the kernel `(P^{-1} - eps I)^{-1}` and the weight `Q + F + beta^2 I`.

use crate::matrix::{spectral_norm, Matrix};

use super::feasibility::{min_eig_sym, psd_tolerance, worst_over_box, Judge};
use super::riccati::{check_dims, compute_gain_k_with_weight, matched_input_weight, value_iteration};
use super::{
    matched_kernel, Condition, DesignKind, Diagnosis, FeasibilityReport, GainDesign, MatchedModel,
    RiccatiOptions, RiccatiSolution, SynthesisError, SynthesisOptions, SynthesisOutcome,
    SynthesisParams,
};

/// Solves `A^T (P^{-1} + B R1^{-1} B^T)^{-1} A - P + Q + F + beta^2 I = 0`.
pub fn solve_matched_dare(
    a: &Matrix,
    b: &Matrix,
    params: &SynthesisParams,
    f: &Matrix,
    opts: &RiccatiOptions,
) -> Result<RiccatiSolution, SynthesisError> {
    check_dims(a, b, params, f)?;
    value_iteration(a, &matched_input_weight(b, params)?, &params.state_cost(f), opts)
}

/// Audit of the three matched-design conditions.
pub fn matched_feasibility_report(
    b: &Matrix,
    matched: &MatchedModel,
    params: &SynthesisParams,
    p: &Matrix,
    k: &Matrix,
    ac: &Matrix,
    opts: &super::ReportOptions,
) -> Result<FeasibilityReport, SynthesisError> {
    let n = p.rows();
    let eps = params.epsilon();
    let f = matched.bound();
    let judge = Judge::new(f, opts);
    let general = matched.to_uncertainty(b)?;
    let mut entries = Vec::with_capacity(3);

    // B phi = dA, so phi^T B^T B phi = dA^T dA.
    let (worst, at) = worst_over_box(&general, opts.grid_points, |da| {
        min_eig_sym(&(f - &(&da.transpose() * da).scale(2.0 / eps)))
    })?;
    entries.push(judge.entry(Condition::MatchedUncertaintyBound, Some(worst), Some(at), psd_tolerance(f)));

    let gap = &Matrix::identity(n).scale(1.0 / eps) - p;
    entries.push(judge.entry(
        Condition::EpsilonMargin,
        Some(min_eig_sym(&gap)?),
        None,
        psd_tolerance(&gap),
    ));

    let lhs = &Matrix::identity(n).scale(params.beta() * params.beta()) + &(&(&k.transpose() * params.r1()) * k);
    let slack = &lhs - &(&ac.transpose() * ac).scale(2.0 / eps);
    entries.push(judge.entry(
        Condition::MatchedSufficient,
        Some(min_eig_sym(&slack)?),
        None,
        psd_tolerance(&lhs),
    ));

    Ok(FeasibilityReport { entries })
}

pub fn synthesize_matched(
    a: &Matrix,
    b: &Matrix,
    matched: &MatchedModel,
    params: &SynthesisParams,
) -> Result<SynthesisOutcome, SynthesisError> {
    synthesize_matched_with(a, b, matched, params, &SynthesisOptions::default())
}

/// Matched-uncertainty synthesis. `alpha` and `R2` are ignored.
pub fn synthesize_matched_with(
    a: &Matrix,
    b: &Matrix,
    matched: &MatchedModel,
    params: &SynthesisParams,
    opts: &SynthesisOptions,
) -> Result<SynthesisOutcome, SynthesisError> {
    let f = matched.bound();
    let sol = solve_matched_dare(a, b, params, f, &opts.riccati)?;
    let w = matched_input_weight(b, params)?;
    let k = compute_gain_k_with_weight(a, b, &sol.p, params, &w)?;
    let ac = a + &(b * &k);
    let n = a.rows();
    let report = matched_feasibility_report(b, matched, params, &sol.p, &k, &ac, &opts.report)?;
    let design = GainDesign {
        p: sol.p.clone(),
        k: k.clone(),
        l: Matrix::zeros(n, n),
        ac: ac.clone(),
        iterations: sol.iterations,
        residual: sol.residual,
    };
    let weight = params.state_cost(f);

    let margin = report
        .get(Condition::EpsilonMargin)
        .and_then(|e| e.margin)
        .unwrap_or(f64::NEG_INFINITY);
    let kernel = match matched_kernel(&sol.p, params.epsilon()) {
        Some(kernel) if report.get(Condition::EpsilonMargin).map(|e| e.verdict) == Some(super::Verdict::Holds) => {
            kernel
        }
        kernel => {
            return Err(SynthesisError::EpsilonMargin {
                lambda_min: margin,
                diagnosis: Some(Box::new(Diagnosis {
                    design,
                    z: kernel,
                    q1: Some(weight),
                    report,
                })),
            })
        }
    };

    let lambda_min = min_eig_sym(&weight)?;
    if !(lambda_min > psd_tolerance(&weight)) {
        return Err(SynthesisError::TriggerWeightIndefinite {
            lambda_min,
            diagnosis: Some(Box::new(Diagnosis {
                design,
                z: Some(kernel),
                q1: Some(weight),
                report,
            })),
        });
    }
    let bk = b * &k;
    let denom = spectral_norm(&(&(&bk.transpose() * &kernel) * &bk));
    if !(denom > 0.0) {
        return Err(SynthesisError::ZeroTriggerGain {
            diagnosis: Some(Box::new(Diagnosis {
                design,
                z: Some(kernel),
                q1: Some(weight),
                report,
            })),
        });
    }
    let mu = params.sigma() * lambda_min / denom;

    Ok(SynthesisOutcome {
        kind: DesignKind::Matched,
        p: sol.p,
        k,
        l: Matrix::zeros(n, n),
        z: kernel,
        q1: weight,
        mu,
        ac,
        report,
        iterations: sol.iterations,
        residual: sol.residual,
    })
}
