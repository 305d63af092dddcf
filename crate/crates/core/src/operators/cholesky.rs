//! Upper-triangular factor of a positive semidefinite loss matrix.

use nalgebra::{DMatrix, SymmetricEigen};

use super::OperatorError;

/// Returns upper-triangular `L` with `LᵀL = R`.
///
/// Zero pivots (rows of `R` that vanish, e.g. lossless regions) produce zero
/// rows in `L`. Input with an eigenvalue below `-1e-10·λ_max` is rejected.
pub fn cholesky_loss(r: &DMatrix<f64>) -> Result<DMatrix<f64>, OperatorError> {
    let n = r.nrows();
    if r.ncols() != n {
        return Err(OperatorError::InvalidMaterial("loss matrix must be square".into()));
    }
    let scale = r.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if scale == 0.0 {
        return Ok(DMatrix::zeros(n, n));
    }
    let eig = SymmetricEigen::new(r.clone());
    let lmax = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if lmin < -1e-10 * lmax.abs().max(scale) {
        return Err(OperatorError::Indefinite { min_eigenvalue: lmin, max_eigenvalue: lmax });
    }

    let tol = 1e-14 * scale * n as f64;
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = r[(j, j)];
        for k in 0..j {
            d -= l[(k, j)] * l[(k, j)];
        }
        if d <= tol {
            continue;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = r[(j, i)];
            for k in 0..j {
                s -= l[(k, j)] * l[(k, i)];
            }
            l[(j, i)] = s / ljj;
        }
    }
    Ok(l)
}
