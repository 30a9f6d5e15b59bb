//! Audit of the matrix inequalities a synthesized design must satisfy.
//!
//! Every condition is reduced to the smallest eigenvalue of a symmetric
//! slack matrix. Conditions that depend on the uncertain parameter are
//! evaluated on the vertices of the parameter box and on a tensor grid, and
//! the worst sample is kept as witness.

use std::fmt;

use serde::Serialize;

use crate::matrix::{spectral_norm, sym_eigvals, Matrix, MatrixError};

use super::{SynthesisParams, UncertaintyModel};

/// Identifiers of the audited inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `eps^-1 I - P > 0`, equivalently `(eps^-1 I - P)^{-1} > 0`.
    EpsilonMargin,
    /// `eps^-1 dA^T dA <= F` over the parameter box.
    UncertaintyBound,
    /// `beta^2 I + L^T R2 L + K^T R1 K - Ac^T (P^{-1} - eps I)^{-1} Ac >= 0`.
    RobustSufficient,
    /// `Z > 0`.
    ZPositive,
    /// `dA^T Z dA <= F` over the parameter box.
    ZUncertaintyBound,
    /// `Q1 = beta^2 I + K^T R1 K + L^T R2 L - Ac^T Z Ac >= 0`.
    Q1NonNegative,
    /// `(2 / eps) phi^T B^T B phi <= F` over the box (matched design).
    MatchedUncertaintyBound,
    /// `beta^2 I + K^T R1 K - (2 / eps) Ac^T Ac >= 0` (matched design).
    MatchedSufficient,
}

impl Condition {
    pub fn id(self) -> &'static str {
        match self {
            Condition::EpsilonMargin => "epsilon_margin",
            Condition::UncertaintyBound => "uncertainty_bound",
            Condition::RobustSufficient => "robust_sufficient",
            Condition::ZPositive => "z_positive",
            Condition::ZUncertaintyBound => "z_uncertainty_bound",
            Condition::Q1NonNegative => "q1_nonnegative",
            Condition::MatchedUncertaintyBound => "matched_uncertainty_bound",
            Condition::MatchedSufficient => "matched_sufficient",
        }
    }

    pub fn statement(self) -> &'static str {
        match self {
            Condition::EpsilonMargin => "eps^-1 I - P > 0",
            Condition::UncertaintyBound => "eps^-1 dA^T dA <= F for all p in the box",
            Condition::RobustSufficient => {
                "beta^2 I + L^T R2 L + K^T R1 K - Ac^T (P^-1 - eps I)^-1 Ac >= 0"
            }
            Condition::ZPositive => "Z = eps^-1 I + P (eps^-1 I - P)^-1 P > 0",
            Condition::ZUncertaintyBound => "dA^T Z dA <= F for all p in the box",
            Condition::Q1NonNegative => "Q1 = beta^2 I + K^T R1 K + L^T R2 L - Ac^T Z Ac >= 0",
            Condition::MatchedUncertaintyBound => "(2/eps) phi^T B^T B phi <= F for all p in the box",
            Condition::MatchedSufficient => "beta^2 I + K^T R1 K - (2/eps) Ac^T Ac >= 0",
        }
    }

    /// Strict conditions need a positive margin, the others a non-negative one.
    pub fn is_strict(self) -> bool {
        matches!(self, Condition::EpsilonMargin | Condition::ZPositive)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Marginal,
    Fails,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionEntry {
    pub condition: Condition,
    pub verdict: Verdict,
    /// Smallest eigenvalue of the slack matrix at the worst sample; `None`
    /// when the slack could not be formed.
    pub margin: Option<f64>,
    /// Parameter value attaining `margin`, for box-dependent conditions.
    pub witness_p: Option<Vec<f64>>,
    /// Tolerance used for the holds/marginal boundary.
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct FeasibilityReport {
    pub entries: Vec<ConditionEntry>,
}

impl FeasibilityReport {
    pub fn get(&self, condition: Condition) -> Option<&ConditionEntry> {
        self.entries.iter().find(|e| e.condition == condition)
    }

    pub fn all_hold(&self) -> bool {
        self.entries.iter().all(|e| e.verdict == Verdict::Holds)
    }

    pub fn violations(&self) -> impl Iterator<Item = &ConditionEntry> {
        self.entries.iter().filter(|e| e.verdict != Verdict::Holds)
    }
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            let verdict = match e.verdict {
                Verdict::Holds => "holds",
                Verdict::Marginal => "MARGINAL",
                Verdict::Fails => "FAILS",
            };
            write!(f, "  {:<26} {:<8}", e.condition.id(), verdict)?;
            match e.margin {
                Some(m) => write!(f, " margin {m:>+.6e}")?,
                None => write!(f, " margin undefined")?,
            }
            if let Some(p) = &e.witness_p {
                write!(f, " at p = {p:?}")?;
            }
            if let Some(note) = &e.note {
                write!(f, " ({note})")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Knobs of the audit.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    /// Grid samples per parameter coordinate, on top of the box vertices.
    pub grid_points: usize,
    /// Width of the "marginal" band below zero. Defaults to `1e-6 * |F|`.
    pub marginal_tol: Option<f64>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            grid_points: 101,
            marginal_tol: None,
        }
    }
}

/// Tolerance of the PSD order `X <= Y`: `lambda_min(Y - X) >= -1e-9 max(1, |Y|)`.
pub fn psd_tolerance(reference: &Matrix) -> f64 {
    1e-9 * spectral_norm(reference).max(1.0)
}

pub(crate) fn min_eig_sym(m: &Matrix) -> Result<f64, MatrixError> {
    Ok(sym_eigvals(&m.symmetric_part())?
        .first()
        .copied()
        .unwrap_or(f64::INFINITY))
}

pub(crate) struct Judge {
    marginal_tol: f64,
}

impl Judge {
    pub(crate) fn new(f: &Matrix, opts: &ReportOptions) -> Self {
        Self {
            marginal_tol: opts.marginal_tol.unwrap_or(1e-6 * spectral_norm(f)),
        }
    }

    pub(crate) fn entry(
        &self,
        condition: Condition,
        margin: Option<f64>,
        witness_p: Option<Vec<f64>>,
        tolerance: f64,
    ) -> ConditionEntry {
        let verdict = match margin {
            None => Verdict::Fails,
            Some(m) => {
                let holds = if condition.is_strict() {
                    m > tolerance
                } else {
                    m >= -tolerance
                };
                if holds {
                    Verdict::Holds
                } else if m >= -self.marginal_tol.max(tolerance) && self.marginal_tol > 0.0 {
                    Verdict::Marginal
                } else {
                    Verdict::Fails
                }
            }
        };
        ConditionEntry {
            condition,
            verdict,
            margin,
            witness_p,
            tolerance,
            note: None,
        }
    }
}

/// Worst (smallest) value of `slack_min_eig(dA(p))` over the sampled box.
pub(crate) fn worst_over_box(
    model: &UncertaintyModel,
    grid_points: usize,
    mut slack: impl FnMut(&Matrix) -> Result<f64, MatrixError>,
) -> Result<(f64, Vec<f64>), MatrixError> {
    let mut worst = f64::INFINITY;
    let mut witness = Vec::new();
    for p in model.sample_points(grid_points) {
        let da = model
            .delta_a(&p)
            .expect("sample points match the model's parameter dimension");
        let m = slack(&da)?;
        if m < worst {
            worst = m;
            witness = p;
        }
    }
    Ok((worst, witness))
}

/// Everything a feasibility audit of a mismatched design needs.
#[derive(Debug, Clone, Copy)]
pub struct DesignView<'a> {
    pub p: &'a Matrix,
    pub k: &'a Matrix,
    pub l: &'a Matrix,
    pub ac: &'a Matrix,
    /// `None` when `eps^-1 I - P` is singular and `Z` cannot be formed.
    pub z: Option<&'a Matrix>,
    pub q1: Option<&'a Matrix>,
}

/// Evaluates all six conditions of the mismatched design.
pub fn feasibility_report(
    model: &UncertaintyModel,
    params: &SynthesisParams,
    design: DesignView<'_>,
    opts: &ReportOptions,
) -> Result<FeasibilityReport, MatrixError> {
    let n = design.p.rows();
    let eye = Matrix::identity(n);
    let eps = params.epsilon();
    let f = model.bound();
    let judge = Judge::new(f, opts);
    let f_tol = psd_tolerance(f);
    let mut entries = Vec::with_capacity(6);

    let margin_mat = &eye.scale(1.0 / eps) - design.p;
    let tol = psd_tolerance(&margin_mat);
    entries.push(judge.entry(Condition::EpsilonMargin, Some(min_eig_sym(&margin_mat)?), None, tol));

    let (worst, at) = worst_over_box(model, opts.grid_points, |da| {
        min_eig_sym(&(f - &(&da.transpose() * da).scale(1.0 / eps)))
    })?;
    entries.push(judge.entry(Condition::UncertaintyBound, Some(worst), Some(at), f_tol));

    let robust_lhs = &(&eye.scale(params.beta() * params.beta())
        + &(&(&design.l.transpose() * params.r2()) * design.l))
        + &(&(&design.k.transpose() * params.r1()) * design.k);
    let robust = perturbed_inverse(design.p, eps).map(|kern| &robust_lhs - &(&(&design.ac.transpose() * &kern) * design.ac));
    let mut entry = match &robust {
        Some(slack) => judge.entry(
            Condition::RobustSufficient,
            Some(min_eig_sym(slack)?),
            None,
            psd_tolerance(&robust_lhs),
        ),
        None => judge.entry(Condition::RobustSufficient, None, None, 0.0),
    };
    if robust.is_none() {
        entry.note = Some("P^-1 - eps I is singular".into());
    }
    entries.push(entry);

    match design.z {
        Some(z) => {
            let tol = psd_tolerance(z);
            let z_entry = judge.entry(Condition::ZPositive, Some(min_eig_sym(z)?), None, tol);
            let z_ok = z_entry.verdict == Verdict::Holds;
            entries.push(z_entry);
            let (worst, at) = worst_over_box(model, opts.grid_points, |da| {
                min_eig_sym(&(f - &(&(&da.transpose() * z) * da)))
            })?;
            let mut entry = judge.entry(Condition::ZUncertaintyBound, Some(worst), Some(at), f_tol);
            if !z_ok {
                entry.note = Some("Z is not positive definite, so this bound is vacuous".into());
            }
            entries.push(entry);
        }
        None => {
            for c in [Condition::ZPositive, Condition::ZUncertaintyBound] {
                let mut e = judge.entry(c, None, None, 0.0);
                e.note = Some("Z undefined: eps^-1 I - P is singular".into());
                entries.push(e);
            }
        }
    }

    match design.q1 {
        Some(q1) => {
            let tol = psd_tolerance(&robust_lhs);
            entries.push(judge.entry(Condition::Q1NonNegative, Some(min_eig_sym(q1)?), None, tol));
        }
        None => {
            let mut e = judge.entry(Condition::Q1NonNegative, None, None, 0.0);
            e.note = Some("Q1 undefined: Z could not be formed".into());
            entries.push(e);
        }
    }

    Ok(FeasibilityReport { entries })
}

/// `(P^{-1} - eps I)^{-1}`, evaluated as `(I - eps P)^{-1} P`.
pub(crate) fn perturbed_inverse(p: &Matrix, eps: f64) -> Option<Matrix> {
    let n = p.rows();
    let core = &Matrix::identity(n) - &p.scale(eps);
    crate::matrix::inverse(&core).ok().map(|inv| (&inv * p).symmetric_part())
}
