use serde::Serialize;

use crate::matrix::{
    is_positive_definite, is_positive_semidefinite, pseudo_inverse, Matrix,
    DEFAULT_DEFINITENESS_TOL,
};

use super::SynthesisError;

/// Cost weights and scalar design parameters of the robust synthesis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthesisParams {
    q: Matrix,
    r1: Matrix,
    r2: Matrix,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    sigma: f64,
}

impl SynthesisParams {
    /// Validates and bundles the design parameters.
    ///
    /// `q` must be PSD, `r1` and `r2` PD; `epsilon > 0`, `0 < sigma < 1`,
    /// `beta >= 0` and `alpha` finite.
    pub fn new(
        q: Matrix,
        r1: Matrix,
        r2: Matrix,
        alpha: f64,
        beta: f64,
        epsilon: f64,
        sigma: f64,
    ) -> Result<Self, SynthesisError> {
        let tol = DEFAULT_DEFINITENESS_TOL;
        if !q.is_square() || !r2.is_square() || q.rows() != r2.rows() {
            return Err(SynthesisError::InvalidParams(format!(
                "Q ({}x{}) and R2 ({}x{}) must be square of the state dimension",
                q.rows(),
                q.cols(),
                r2.rows(),
                r2.cols()
            )));
        }
        if !r1.is_square() {
            return Err(SynthesisError::InvalidParams("R1 must be square".into()));
        }
        if !is_positive_semidefinite(&q, tol)? {
            return Err(SynthesisError::InvalidParams("Q must be positive semidefinite".into()));
        }
        if !is_positive_definite(&r1, tol)? {
            return Err(SynthesisError::InvalidParams("R1 must be positive definite".into()));
        }
        if !is_positive_definite(&r2, tol)? {
            return Err(SynthesisError::InvalidParams("R2 must be positive definite".into()));
        }
        let params = Self {
            q,
            r1,
            r2,
            alpha,
            beta,
            epsilon,
            sigma,
        };
        params.check_scalars()?;
        Ok(params)
    }

    fn check_scalars(&self) -> Result<(), SynthesisError> {
        if !self.alpha.is_finite() {
            return Err(SynthesisError::InvalidParams("alpha must be finite".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(SynthesisError::InvalidParams("beta must be finite and >= 0".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(SynthesisError::InvalidParams("epsilon must be finite and > 0".into()));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(SynthesisError::InvalidParams("sigma must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }
    pub fn r1(&self) -> &Matrix {
        &self.r1
    }
    pub fn r2(&self) -> &Matrix {
        &self.r2
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn state_dim(&self) -> usize {
        self.q.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.r1.rows()
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self, SynthesisError> {
        let p = Self {
            epsilon,
            ..self.clone()
        };
        p.check_scalars()?;
        Ok(p)
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self, SynthesisError> {
        let p = Self {
            sigma,
            ..self.clone()
        };
        p.check_scalars()?;
        Ok(p)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self, SynthesisError> {
        let p = Self {
            alpha,
            ..self.clone()
        };
        p.check_scalars()?;
        Ok(p)
    }

    /// `Q + F + beta^2 I`, the constant term of the Riccati map.
    pub fn state_cost(&self, f: &Matrix) -> Matrix {
        let n = self.state_dim();
        &(&self.q + f) + &Matrix::identity(n).scale(self.beta * self.beta)
    }
}

/// Affine parametric uncertainty `dA(p) = sum_i p_i E_i` over a box, with
/// bound matrix `F`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UncertaintyModel {
    basis: Vec<Matrix>,
    p_lo: Vec<f64>,
    p_hi: Vec<f64>,
    bound: Matrix,
}

impl UncertaintyModel {
    pub fn new(
        basis: Vec<Matrix>,
        p_lo: Vec<f64>,
        p_hi: Vec<f64>,
        bound: Matrix,
    ) -> Result<Self, SynthesisError> {
        let n = bound.rows();
        if !bound.is_square() {
            return Err(SynthesisError::Dimension("bound F must be square".into()));
        }
        if let Some((i, e)) = basis.iter().enumerate().find(|(_, e)| e.shape() != (n, n)) {
            return Err(SynthesisError::Dimension(format!(
                "uncertainty basis matrix {i} is {}x{}, expected {n}x{n}",
                e.rows(),
                e.cols()
            )));
        }
        check_box(&p_lo, &p_hi, basis.len())?;
        check_bound(&bound)?;
        Ok(Self {
            basis,
            p_lo,
            p_hi,
            bound,
        })
    }

    /// Model without parametric uncertainty.
    pub fn certain(bound: Matrix) -> Result<Self, SynthesisError> {
        Self::new(Vec::new(), Vec::new(), Vec::new(), bound)
    }

    pub fn basis(&self) -> &[Matrix] {
        &self.basis
    }
    pub fn p_lo(&self) -> &[f64] {
        &self.p_lo
    }
    pub fn p_hi(&self) -> &[f64] {
        &self.p_hi
    }
    pub fn bound(&self) -> &Matrix {
        &self.bound
    }
    pub fn state_dim(&self) -> usize {
        self.bound.rows()
    }
    pub fn param_dim(&self) -> usize {
        self.basis.len()
    }

    /// Same basis and bound with a different parameter box.
    pub fn with_box(&self, p_lo: Vec<f64>, p_hi: Vec<f64>) -> Result<Self, SynthesisError> {
        Self::new(self.basis.clone(), p_lo, p_hi, self.bound.clone())
    }

    /// Projects `p` onto the box; the flag reports whether anything moved.
    pub fn clamp(&self, p: &[f64]) -> (Vec<f64>, bool) {
        let mut moved = false;
        let c = p
            .iter()
            .zip(self.p_lo.iter().zip(&self.p_hi))
            .map(|(v, (lo, hi))| {
                let c = v.clamp(*lo, *hi);
                moved |= c != *v;
                c
            })
            .collect();
        (c, moved)
    }

    /// `sum_i p_i E_i` without any box check.
    pub fn delta_a(&self, p: &[f64]) -> Result<Matrix, SynthesisError> {
        if p.len() != self.basis.len() {
            return Err(SynthesisError::Dimension(format!(
                "parameter vector has {} entries, model has {} basis matrices",
                p.len(),
                self.basis.len()
            )));
        }
        let n = self.state_dim();
        Ok(self
            .basis
            .iter()
            .zip(p)
            .fold(Matrix::zeros(n, n), |acc, (e, pi)| &acc + &e.scale(*pi)))
    }

    /// Box vertices plus a tensor grid with `points` samples per coordinate.
    ///
    /// With `points < 2` only the vertices are produced. A model without
    /// parameters yields the single empty point.
    pub fn sample_points(&self, points: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.param_dim())
            .map(|i| axis(self.p_lo[i], self.p_hi[i], points))
            .collect();
        let mut out = vec![Vec::new()];
        for ax in &axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    ax.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push(*v);
                        p
                    })
                })
                .collect();
        }
        out
    }
}

fn check_box(p_lo: &[f64], p_hi: &[f64], count: usize) -> Result<(), SynthesisError> {
    if p_lo.len() != count || p_hi.len() != count {
        return Err(SynthesisError::Dimension(format!(
            "parameter bounds have {}/{} entries for {count} basis matrices",
            p_lo.len(),
            p_hi.len(),
        )));
    }
    if let Some(i) = (0..count).find(|&i| !(p_lo[i] <= p_hi[i])) {
        return Err(SynthesisError::InvalidParams(format!(
            "parameter box is empty in coordinate {i} ({} > {})",
            p_lo[i], p_hi[i]
        )));
    }
    Ok(())
}

fn check_bound(bound: &Matrix) -> Result<(), SynthesisError> {
    if !is_positive_semidefinite(bound, DEFAULT_DEFINITENESS_TOL)? {
        return Err(SynthesisError::InvalidParams(
            "bound F must be symmetric positive semidefinite".into(),
        ));
    }
    Ok(())
}

// Grid along one coordinate; always contains both endpoints exactly.
fn axis(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if lo == hi {
        return vec![lo];
    }
    if points < 2 {
        return vec![lo, hi];
    }
    let last = points - 1;
    (0..points)
        .map(|i| {
            if i == last {
                hi
            } else {
                lo + (hi - lo) * (i as f64) / (last as f64)
            }
        })
        .collect()
}

/// Matched uncertainty `dA(p) = B phi(p)` with `phi(p) = sum_i p_i Phi_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchedModel {
    phi_basis: Vec<Matrix>,
    p_lo: Vec<f64>,
    p_hi: Vec<f64>,
    bound: Matrix,
}

impl MatchedModel {
    pub fn new(
        phi_basis: Vec<Matrix>,
        p_lo: Vec<f64>,
        p_hi: Vec<f64>,
        bound: Matrix,
    ) -> Result<Self, SynthesisError> {
        let n = bound.rows();
        let m = phi_basis.first().map_or(0, Matrix::rows);
        if let Some(i) = phi_basis.iter().position(|phi| phi.shape() != (m, n)) {
            return Err(SynthesisError::Dimension(format!(
                "phi basis matrix {i} must be {m}x{n}"
            )));
        }
        if !bound.is_square() {
            return Err(SynthesisError::Dimension("bound F must be square".into()));
        }
        check_box(&p_lo, &p_hi, phi_basis.len())?;
        check_bound(&bound)?;
        Ok(Self {
            phi_basis,
            p_lo,
            p_hi,
            bound,
        })
    }

    /// Extracts `Phi_i = B^+ E_i`, failing if any `E_i` leaves the range of `B`.
    pub fn from_uncertainty(model: &UncertaintyModel, b: &Matrix) -> Result<Self, SynthesisError> {
        let b_pinv = pseudo_inverse(b)?;
        let mut phi_basis = Vec::with_capacity(model.param_dim());
        for (i, e) in model.basis().iter().enumerate() {
            let phi = &b_pinv * e;
            let defect = (&(b * &phi) - e).max_abs();
            if defect > 1e-12 * e.max_abs().max(1.0) {
                return Err(SynthesisError::NotMatched { index: i, defect });
            }
            phi_basis.push(phi);
        }
        Self::new(
            phi_basis,
            model.p_lo().to_vec(),
            model.p_hi().to_vec(),
            model.bound().clone(),
        )
    }

    pub fn phi_basis(&self) -> &[Matrix] {
        &self.phi_basis
    }
    pub fn bound(&self) -> &Matrix {
        &self.bound
    }
    pub fn p_lo(&self) -> &[f64] {
        &self.p_lo
    }
    pub fn p_hi(&self) -> &[f64] {
        &self.p_hi
    }

    /// The equivalent general model with `E_i = B Phi_i`.
    pub fn to_uncertainty(&self, b: &Matrix) -> Result<UncertaintyModel, SynthesisError> {
        let basis = self.phi_basis.iter().map(|phi| b * phi).collect();
        UncertaintyModel::new(basis, self.p_lo.clone(), self.p_hi.clone(), self.bound.clone())
    }

    pub fn phi(&self, p: &[f64], input_dim: usize) -> Result<Matrix, SynthesisError> {
        if p.len() != self.phi_basis.len() {
            return Err(SynthesisError::Dimension(format!(
                "parameter vector has {} entries, model has {}",
                p.len(),
                self.phi_basis.len()
            )));
        }
        let n = self.bound.rows();
        Ok(self
            .phi_basis
            .iter()
            .zip(p)
            .fold(Matrix::zeros(input_dim, n), |acc, (phi, pi)| {
                &acc + &phi.scale(*pi)
            }))
    }
}
