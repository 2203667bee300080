use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Participation of every state (rows) in every mode (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Participation {
    pub eigenvalues: Vec<Complex<f64>>,
    pub factors: DMatrix<f64>,
}

impl Participation {
    /// Mode with the largest real part (continuous-time reading); among a
    /// conjugate pair the member with positive imaginary part.
    pub fn most_unstable_mode(&self) -> usize {
        self.pick(|l| l.re)
    }

    /// Mode with the largest modulus (discrete-time reading).
    pub fn most_unstable_discrete_mode(&self) -> usize {
        self.pick(|l| l.norm())
    }

    fn pick(&self, key: impl Fn(&Complex<f64>) -> f64) -> usize {
        let mut best = 0;
        for (i, l) in self.eigenvalues.iter().enumerate() {
            let b = &self.eigenvalues[best];
            let (kl, kb) = (key(l), key(b));
            if kl > kb + 1e-12 * kb.abs().max(1.0) || ((kl - kb).abs() <= 1e-12 * kb.abs().max(1.0) && l.im > b.im) {
                best = i;
            }
        }
        best
    }

    pub fn mode(&self, i: usize) -> Vec<f64> {
        self.factors.column(i).iter().copied().collect()
    }
}

/// Right eigenvector for an eigenvalue by shifted inverse iteration.
fn right_eigenvector(a: &DMatrix<Complex<f64>>, lambda: Complex<f64>, shift: f64) -> Result<DVector<Complex<f64>>> {
    let n = a.nrows();
    let shifted = a - DMatrix::<Complex<f64>>::identity(n, n) * (lambda + Complex::new(shift, shift));
    let lu = shifted.lu();
    let mut v = DVector::from_fn(n, |i, _| Complex::new(1.0 + 0.1 * i as f64, 0.05 * (i % 3) as f64));
    for _ in 0..4 {
        v = lu
            .solve(&v)
            .ok_or_else(|| Error::DefectiveMatrix("inverse iteration hit an exact singularity".into()))?;
        let norm = v.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::DefectiveMatrix("inverse iteration diverged".into()));
        }
        v.unscale_mut(norm);
    }
    Ok(v)
}

/// Normalized participation factors `p_ki = |w_i(k) v_i(k)|`, where `v_i`
/// and `w_i` are right and left eigenvectors with `w_iᵀ v_i = 1`; each mode
/// is normalized to sum to 1.
///
/// Eigenvalues must be separated by at least `1e-10` of the spectral norm.
pub fn participation_factors(a: &DMatrix<f64>) -> Result<Participation> {
    let n = a.nrows();
    let eigenvalues = linalg::eigenvalues(a)?;
    if n == 0 {
        return Ok(Participation { eigenvalues, factors: DMatrix::zeros(0, 0) });
    }
    let norm = a.clone().singular_values().max();
    for i in 0..n {
        for j in i + 1..n {
            if (eigenvalues[i] - eigenvalues[j]).norm() < 1e-10 * norm {
                return Err(Error::DefectiveMatrix(format!(
                    "eigenvalues {} and {} coincide",
                    eigenvalues[i], eigenvalues[j]
                )));
            }
        }
    }
    let ac = a.map(|v| Complex::new(v, 0.0));
    let shift = 1e-10 * norm.max(f64::MIN_POSITIVE);
    let mut right = DMatrix::<Complex<f64>>::zeros(n, n);
    for (i, &l) in eigenvalues.iter().enumerate() {
        right.set_column(i, &right_eigenvector(&ac, l, shift)?);
    }
    let left = right
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::DefectiveMatrix("eigenvector matrix is singular".into()))?;
    let mut factors = DMatrix::zeros(n, n);
    for i in 0..n {
        for k in 0..n {
            factors[(k, i)] = (left[(i, k)] * right[(k, i)]).norm();
        }
        let total: f64 = factors.column(i).sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::DefectiveMatrix(format!("mode {i} has no participation")));
        }
        factors.column_mut(i).unscale_mut(total);
    }
    Ok(Participation { eigenvalues, factors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    #[test]
    fn diagonal_gives_identity() {
        let p = participation_factors(&DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0, 0.5]))).unwrap();
        for i in 0..3 {
            let mode = p.eigenvalues.iter().position(|l| (l.re - [-1.0, -2.0, 0.5][i]).abs() < 1e-12).unwrap();
            assert_abs_diff_eq!(p.factors[(i, mode)], 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(p.eigenvalues[p.most_unstable_mode()].re, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn rotation_pair() {
        let p = participation_factors(&dmatrix![-0.1, 2.0; -2.0, -0.1]).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(p.factors[(0, i)], 0.5, epsilon = 1e-10);
            assert_abs_diff_eq!(p.factors.column(i).sum(), 1.0, epsilon = 1e-12);
        }
        assert!(p.eigenvalues[p.most_unstable_mode()].im > 0.0);
    }

    #[test]
    fn repeated_eigenvalue_is_defective() {
        assert!(matches!(
            participation_factors(&dmatrix![1.0, 1.0; 0.0, 1.0]),
            Err(Error::DefectiveMatrix(_))
        ));
    }
}
