//! Modified discrete Riccati equation and the gains derived from it.
//!
//! The equation solved here is
//!
//! ```text
//! A^T S^{-1} A - P + Q + F + beta^2 I = 0,
//! S = P^{-1} + B R1^{-1} B^T + alpha^2 Pi R2^{-1} Pi^T,   Pi = I - B B^+
//! ```
//!
//! by value iteration `P <- A^T (P^{-1} + W)^{-1} A + Q + F + beta^2 I`
//! starting from `P0 = Q + F + beta^2 I`. `(P^{-1} + W)^{-1}` is evaluated as
//! `(I + P W)^{-1} P`, so a singular iterate never needs to be inverted.

use serde::Serialize;

use crate::matrix::{
    inverse, is_positive_definite, is_positive_semidefinite, pseudo_inverse, Matrix,
    DEFAULT_DEFINITENESS_TOL,
};

use super::{SynthesisError, SynthesisParams};

/// Stopping rule for the value iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiOptions {
    /// Stop once `max|P_{j+1} - P_j| <= tol * max(1, max|P_{j+1}|)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiccatiSolution {
    pub p: Matrix,
    pub iterations: usize,
    /// Max-norm residual of the Riccati equation at `p`.
    pub residual: f64,
}

/// `I - B B^+`, the orthogonal projector onto the complement of `range(B)`.
pub fn projector_complement(b: &Matrix) -> Result<Matrix, SynthesisError> {
    let b_pinv = pseudo_inverse(b)?;
    let proj = &Matrix::identity(b.rows()) - &(b * &b_pinv);
    // B B^+ is symmetric in exact arithmetic.
    Ok(proj.symmetric_part())
}

/// `W = B R1^{-1} B^T + alpha^2 Pi R2^{-1} Pi^T`.
pub fn input_weight(b: &Matrix, params: &SynthesisParams) -> Result<Matrix, SynthesisError> {
    let bt = b.transpose();
    let mut w = &(b * &inverse(params.r1())?) * &bt;
    let alpha = params.alpha();
    if alpha != 0.0 {
        let proj = projector_complement(b)?;
        let virt = &(&proj * &inverse(params.r2())?) * &proj.transpose();
        w = &w + &virt.scale(alpha * alpha);
    }
    Ok(w.symmetric_part())
}

/// `B R1^{-1} B^T`, the weight of the reduced (matched) equation.
pub fn matched_input_weight(b: &Matrix, params: &SynthesisParams) -> Result<Matrix, SynthesisError> {
    let w = &(b * &inverse(params.r1())?) * &b.transpose();
    Ok(w.symmetric_part())
}

/// `S^{-1} = (P^{-1} + W)^{-1}`, computed as `(I + P W)^{-1} P`.
pub fn s_inverse(p: &Matrix, w: &Matrix) -> Result<Matrix, SynthesisError> {
    let n = p.rows();
    let core = &Matrix::identity(n) + &(p * w);
    let s_inv = &inverse(&core)? * p;
    Ok(s_inv.symmetric_part())
}

pub(crate) fn check_dims(a: &Matrix, b: &Matrix, params: &SynthesisParams, f: &Matrix) -> Result<(), SynthesisError> {
    let n = a.rows();
    if !a.is_square() {
        return Err(SynthesisError::Dimension(format!("A must be square, got {}x{}", a.rows(), a.cols())));
    }
    if b.rows() != n {
        return Err(SynthesisError::Dimension(format!("B has {} rows, A is {n}x{n}", b.rows())));
    }
    if params.state_dim() != n {
        return Err(SynthesisError::Dimension(format!(
            "Q/R2 are {0}x{0}, state dimension is {n}",
            params.state_dim()
        )));
    }
    if params.input_dim() != b.cols() {
        return Err(SynthesisError::Dimension(format!(
            "R1 is {0}x{0}, B has {1} columns",
            params.input_dim(),
            b.cols()
        )));
    }
    if f.shape() != (n, n) {
        return Err(SynthesisError::Dimension(format!("F must be {n}x{n}")));
    }
    Ok(())
}

/// Generic value iteration `P <- A^T (P^{-1} + W)^{-1} A + C` from `P0 = C`.
pub(crate) fn value_iteration(
    a: &Matrix,
    w: &Matrix,
    c: &Matrix,
    opts: &RiccatiOptions,
) -> Result<RiccatiSolution, SynthesisError> {
    let at = a.transpose();
    let mut p = c.clone();
    let mut step = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        let next = (&(&at * &s_inverse(&p, w)?) * a + c).symmetric_part();
        if next.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(SynthesisError::NotConverged {
                iterations: iter,
                residual: f64::INFINITY,
            });
        }
        if !is_positive_semidefinite(&next, DEFAULT_DEFINITENESS_TOL * next.max_abs().max(1.0))? {
            return Err(SynthesisError::LostDefiniteness { iteration: iter });
        }
        step = (&next - &p).max_abs();
        p = next;
        if step <= opts.tol * p.max_abs().max(1.0) {
            if !is_positive_definite(&p, DEFAULT_DEFINITENESS_TOL)? {
                return Err(SynthesisError::LostDefiniteness { iteration: iter });
            }
            let residual = residual_with_weight(a, w, c, &p)?;
            return Ok(RiccatiSolution {
                p,
                iterations: iter,
                residual,
            });
        }
    }
    Err(SynthesisError::NotConverged {
        iterations: opts.max_iter,
        residual: step,
    })
}

fn residual_with_weight(a: &Matrix, w: &Matrix, c: &Matrix, p: &Matrix) -> Result<f64, SynthesisError> {
    let lhs = &(&(&a.transpose() * &s_inverse(p, w)?) * a) - p;
    Ok((&lhs + c).max_abs())
}

/// Solves the modified Riccati equation for `P`.
pub fn solve_modified_dare(
    a: &Matrix,
    b: &Matrix,
    params: &SynthesisParams,
    f: &Matrix,
) -> Result<RiccatiSolution, SynthesisError> {
    solve_modified_dare_with(a, b, params, f, &RiccatiOptions::default())
}

pub fn solve_modified_dare_with(
    a: &Matrix,
    b: &Matrix,
    params: &SynthesisParams,
    f: &Matrix,
    opts: &RiccatiOptions,
) -> Result<RiccatiSolution, SynthesisError> {
    check_dims(a, b, params, f)?;
    let w = input_weight(b, params)?;
    value_iteration(a, &w, &params.state_cost(f), opts)
}

/// Max-norm residual `|A^T S^{-1} A - P + Q + F + beta^2 I|` of a candidate `P`.
pub fn riccati_residual(
    a: &Matrix,
    b: &Matrix,
    params: &SynthesisParams,
    f: &Matrix,
    p: &Matrix,
) -> Result<f64, SynthesisError> {
    check_dims(a, b, params, f)?;
    residual_with_weight(a, &input_weight(b, params)?, &params.state_cost(f), p)
}

/// `K = -R1^{-1} B^T S^{-1} A`.
pub fn compute_gain_k(
    a: &Matrix,
    b: &Matrix,
    p: &Matrix,
    params: &SynthesisParams,
) -> Result<Matrix, SynthesisError> {
    compute_gain_k_with_weight(a, b, p, params, &input_weight(b, params)?)
}

pub(crate) fn compute_gain_k_with_weight(
    a: &Matrix,
    b: &Matrix,
    p: &Matrix,
    params: &SynthesisParams,
    w: &Matrix,
) -> Result<Matrix, SynthesisError> {
    let s_inv = s_inverse(p, w)?;
    Ok(-(&(&(&inverse(params.r1())? * &b.transpose()) * &s_inv) * a))
}

/// `L = -alpha R2^{-1} Pi S^{-1} A`.
pub fn compute_gain_l(
    a: &Matrix,
    b: &Matrix,
    p: &Matrix,
    params: &SynthesisParams,
) -> Result<Matrix, SynthesisError> {
    let s_inv = s_inverse(p, &input_weight(b, params)?)?;
    let proj = projector_complement(b)?;
    let l = &(&(&inverse(params.r2())? * &proj) * &s_inv) * a;
    Ok(l.scale(-params.alpha()))
}
