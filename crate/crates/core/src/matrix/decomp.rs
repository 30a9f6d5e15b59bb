use super::eigen::{max_eig, min_eig, SYMMETRY_TOL};
use super::{Matrix, MatrixError};

/// Default pivot tolerance for the definiteness tests.
pub const DEFAULT_DEFINITENESS_TOL: f64 = 1e-9;

const RCOND_MIN: f64 = 1e-13;
const RANK_TOL: f64 = 1e-10;

fn require_symmetric(m: &Matrix) -> Result<(), MatrixError> {
    if !m.is_square() {
        return Err(MatrixError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let defect = m.symmetry_defect();
    if defect > SYMMETRY_TOL {
        return Err(MatrixError::NotSymmetric { defect });
    }
    Ok(())
}

/// Outcome of a symmetric elimination with diagonal pivoting.
struct Pivots {
    /// Schur complement left over when elimination stopped (possibly empty).
    rest: Matrix,
}

// Pivoted LDL^T: eliminate on the largest remaining diagonal entry until it
// no longer exceeds `tol`.
fn pivoted_ldl(m: &Matrix, tol: f64) -> Pivots {
    let mut a = m.symmetric_part();
    let mut active: Vec<usize> = (0..a.rows()).collect();
    while !active.is_empty() {
        let (pos, &piv_idx) = active
            .iter()
            .enumerate()
            .max_by(|(_, &i), (_, &j)| a[(i, i)].total_cmp(&a[(j, j)]))
            .expect("non-empty");
        let d = a[(piv_idx, piv_idx)];
        if d <= tol {
            break;
        }
        active.swap_remove(pos);
        for &i in &active {
            let l = a[(i, piv_idx)] / d;
            if l == 0.0 {
                continue;
            }
            for &j in &active {
                a[(i, j)] -= l * a[(piv_idx, j)];
            }
        }
    }
    active.sort_unstable();
    let k = active.len();
    let mut rest = Matrix::zeros(k, k);
    for (r, &i) in active.iter().enumerate() {
        for (c, &j) in active.iter().enumerate() {
            rest[(r, c)] = a[(i, j)];
        }
    }
    Pivots { rest }
}

/// `true` iff every pivot of a pivoted symmetric factorization exceeds `tol`.
pub fn is_positive_definite(m: &Matrix, tol: f64) -> Result<bool, MatrixError> {
    require_symmetric(m)?;
    Ok(pivoted_ldl(m, tol).rest.rows() == 0)
}

/// Semidefinite variant: pivots may be as small as `-tol`.
pub fn is_positive_semidefinite(m: &Matrix, tol: f64) -> Result<bool, MatrixError> {
    require_symmetric(m)?;
    let rest = pivoted_ldl(m, tol).rest;
    // Every remaining diagonal is <= tol. A PSD remainder also needs
    // |a_ij| <= sqrt(a_ii a_jj), i.e. off-diagonals of order tol.
    let k = rest.rows();
    for i in 0..k {
        if rest[(i, i)] < -tol {
            return Ok(false);
        }
        for j in (i + 1)..k {
            let bound = (rest[(i, i)].max(0.0) * rest[(j, j)].max(0.0)).sqrt() + tol;
            if rest[(i, j)].abs() > bound {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn one_norm(m: &Matrix) -> f64 {
    (0..m.cols())
        .map(|j| (0..m.rows()).map(|i| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse by LU with partial pivoting.
///
/// Fails when the 1-norm reciprocal condition number drops below `1e-13`.
pub fn inverse(m: &Matrix) -> Result<Matrix, MatrixError> {
    if !m.is_square() {
        return Err(MatrixError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    let mut lu = m.clone();
    let mut inv = Matrix::identity(n);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| lu[(i, col)].abs().total_cmp(&lu[(j, col)].abs()))
            .expect("non-empty range");
        if lu[(piv, col)] == 0.0 {
            return Err(MatrixError::Singular { rcond: 0.0 });
        }
        if piv != col {
            for j in 0..n {
                let t = lu[(col, j)];
                lu[(col, j)] = lu[(piv, j)];
                lu[(piv, j)] = t;
                let t = inv[(col, j)];
                inv[(col, j)] = inv[(piv, j)];
                inv[(piv, j)] = t;
            }
        }
        let d = lu[(col, col)];
        for j in 0..n {
            lu[(col, j)] /= d;
            inv[(col, j)] /= d;
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = lu[(i, col)];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                lu[(i, j)] -= f * lu[(col, j)];
                inv[(i, j)] -= f * inv[(col, j)];
            }
        }
    }
    if n > 0 {
        let rcond = 1.0 / (one_norm(m) * one_norm(&inv));
        if !(rcond >= RCOND_MIN) {
            return Err(MatrixError::Singular { rcond });
        }
    }
    Ok(inv)
}

/// Moore-Penrose pseudo-inverse `(B^T B)^{-1} B^T` of a full-column-rank matrix.
pub fn pseudo_inverse(b: &Matrix) -> Result<Matrix, MatrixError> {
    let bt = b.transpose();
    let gram = &bt * b;
    if b.rows() < b.cols() {
        return Err(MatrixError::RankDeficient { sigma_min: 0.0 });
    }
    let sigma_min = min_eig(&gram)?.max(0.0).sqrt();
    let sigma_max = max_eig(&gram)?.max(0.0).sqrt();
    if b.cols() > 0 && sigma_min <= RANK_TOL * sigma_max.max(1.0) {
        return Err(MatrixError::RankDeficient { sigma_min });
    }
    let gram_inv = inverse(&gram).map_err(|_| MatrixError::RankDeficient { sigma_min })?;
    Ok(&gram_inv * &bt)
}

/// Largest singular value, `sqrt(lambda_max(M^T M))`.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.rows() == 0 || m.cols() == 0 {
        return 0.0;
    }
    let gram = if m.rows() >= m.cols() {
        &m.transpose() * m
    } else {
        m * &m.transpose()
    };
    // A Gram matrix is symmetric by construction up to rounding.
    max_eig(&gram.symmetric_part())
        .expect("gram matrix is square and symmetric")
        .max(0.0)
        .sqrt()
}
