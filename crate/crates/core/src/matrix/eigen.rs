use super::{Matrix, MatrixError};

/// Largest `|M - M^T|` entry accepted as "symmetric" by [`sym_eigvals`].
pub const SYMMETRY_TOL: f64 = 1e-9;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix, ascending.
///
/// Cyclic Jacobi rotations on the symmetrized input. Sweeps stop once the
/// off-diagonal Frobenius norm falls below `1e-12` times the matrix scale.
pub fn sym_eigvals(m: &Matrix) -> Result<Vec<f64>, MatrixError> {
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
    let mut a = m.symmetric_part();
    let n = a.rows();
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    let stop = 1e-12 * scale;

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) < stop {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                // signum(+0.0) = 1.0, giving the 45 degree rotation for equal diagonals.
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, p, q, c, s, t);
                rotated = true;
            }
        }
        if !rotated {
            break;
        }
    }

    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(|x, y| x.total_cmp(y));
    Ok(eig)
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)] * a[(i, j)];
            }
        }
    }
    acc.sqrt()
}

// Applies the rotation J^T A J that annihilates a[p][q].
fn rotate(a: &mut Matrix, p: usize, q: usize, c: f64, s: f64, t: f64) {
    let n = a.rows();
    let apq = a[(p, q)];
    let tau = s / (1.0 + c);
    a[(p, p)] -= t * apq;
    a[(q, q)] += t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let arp = a[(r, p)];
        let arq = a[(r, q)];
        let new_rp = arp - s * (arq + tau * arp);
        let new_rq = arq + s * (arp - tau * arq);
        a[(r, p)] = new_rp;
        a[(p, r)] = new_rp;
        a[(r, q)] = new_rq;
        a[(q, r)] = new_rq;
    }
}

/// Smallest eigenvalue of a symmetric matrix (`+inf` for the empty matrix).
pub(crate) fn min_eig(m: &Matrix) -> Result<f64, MatrixError> {
    Ok(sym_eigvals(m)?.first().copied().unwrap_or(f64::INFINITY))
}

/// Largest eigenvalue of a symmetric matrix (`-inf` for the empty matrix).
pub(crate) fn max_eig(m: &Matrix) -> Result<f64, MatrixError> {
    Ok(sym_eigvals(m)?.last().copied().unwrap_or(f64::NEG_INFINITY))
}
