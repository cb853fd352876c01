//! Small dense linear-algebra routines for symmetric positive-definite
//! matrices at latent-space scale.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric matrix, or None when a
/// pivot is not strictly positive.
pub fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Cholesky with the smallest stabilizing ridge from
/// `{0, 1e-10, 1e-8, 1e-6} * trace/d` that succeeds.
pub fn ridge_cholesky(cov: &Array2<f64>) -> Result<Array2<f64>> {
    let d = cov.nrows();
    let trace: f64 = (0..d).map(|i| cov[[i, i]]).sum();
    let scale = trace / d as f64;
    for ridge in [0.0, 1e-10, 1e-8, 1e-6] {
        let mut shifted = cov.clone();
        for i in 0..d {
            shifted[[i, i]] += ridge * scale;
        }
        if let Some(l) = cholesky(&shifted) {
            return Ok(l);
        }
    }
    Err(Error::NumericFailure(
        "covariance is not positive definite even after ridge stabilization".into(),
    ))
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn solve_lower(l: &Array2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut x = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[[i, k]] * x[k];
        }
        x[i] = sum / l[[i, i]];
    }
    x
}

/// Checks symmetry to the stated absolute tolerance.
pub fn is_symmetric(a: &Array2<f64>, tol: f64) -> bool {
    let n = a.nrows();
    if n != a.ncols() {
        return false;
    }
    for i in 0..n {
        for j in 0..i {
            if (a[[i, j]] - a[[j, i]]).abs() > tol {
                return false;
            }
        }
    }
    true
}
