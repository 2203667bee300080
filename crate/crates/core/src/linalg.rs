//! Small dense helpers shared by the numerical modules.

use nalgebra::{Complex, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

const SCHUR_MAX_ITERATIONS: usize = 100_000;

/// Eigenvalues of a general real square matrix via the real Schur form.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = a
        .clone()
        .try_schur(f64::EPSILON, SCHUR_MAX_ITERATIONS)
        .ok_or_else(|| Error::NoConvergence {
            what: "Schur decomposition".into(),
            iterations: SCHUR_MAX_ITERATIONS,
        })?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Symmetric part `(m + mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest absolute eigenvalue of a symmetric matrix (its spectral norm).
pub fn symmetric_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Natural log of the determinant of a symmetric positive definite matrix.
pub fn log_det_spd(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let chol = m.clone().cholesky().ok_or_else(|| {
        Error::InvalidCovariance("matrix is not positive definite".into())
    })?;
    Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

pub fn identity(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}
