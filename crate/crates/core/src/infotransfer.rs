//! Information transfer between subspaces of a linear Gaussian system.
//!
//! The transfer from a source block to a target block over one step is the
//! drop in the target's one-step conditional entropy when the source is
//! frozen. All entropies are in nats and omit the additive `(2πe)` constant,
//! which cancels in every difference. Transfers may be negative.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg;
use crate::sysmodel::{
    self, extract_block, validate_covariance, CovarianceState, LinearSystem, Partition,
};

/// Relative eigenvalue floor below which a conditioning block is singular.
pub const CONDITIONING_FLOOR: f64 = 1e-12;
/// Growth ratio above which [`instability_trend`] raises its flag.
pub const DEFAULT_TREND_THRESHOLD: f64 = 3.0;

/// A conditional entropy value (nats) tagged with whether it belongs to the
/// frozen-source dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyValue {
    pub value: f64,
    pub conditioned: bool,
}

/// Transfer values indexed by time step or operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferSeries {
    values: Vec<f64>,
    labels: Vec<f64>,
    source: String,
    target: String,
}

impl TransferSeries {
    pub fn new(
        values: Vec<f64>,
        labels: Vec<f64>,
        source: impl Into<String>,
        target: impl Into<String>,
    ) -> Result<Self> {
        if values.len() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values but {} labels",
                values.len(),
                labels.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("transfer value {i} is not finite")));
        }
        Ok(Self { values, labels, source: source.into(), target: target.into() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Growth of a transfer series over its trailing window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendReport {
    /// `|last| / |first|` over the window.
    pub ratio: f64,
    pub threshold: f64,
    pub flagged: bool,
}

/// Conditional covariance `Σ_keep − Σ_keep,c Σ_c⁻¹ Σ_keep,cᵀ`.
///
/// A conditioning block below `CONDITIONING_FLOOR·‖Σ‖` is an error, except
/// when `Σ` is identically zero: a point mass conditioned on anything stays
/// a point mass, so the (zero) kept block is returned.
pub fn schur_complement(
    sigma: &DMatrix<f64>,
    keep: &[usize],
    condition_on: &[usize],
) -> Result<DMatrix<f64>> {
    if let Some(i) = keep.iter().find(|i| condition_on.contains(i)) {
        return Err(Error::InvalidPartition(format!(
            "index {i} is both kept and conditioned on"
        )));
    }
    let kept = extract_block(sigma, keep, keep)?;
    if condition_on.is_empty() {
        return Ok(kept);
    }
    let cond = extract_block(sigma, condition_on, condition_on)?;
    if sigma.iter().all(|&v| v == 0.0) {
        return Ok(kept);
    }
    let cross = extract_block(sigma, keep, condition_on)?;

    let eig = SymmetricEigen::new(linalg::symmetrize(&cond));
    let floor = CONDITIONING_FLOOR * linalg::symmetric_norm(&linalg::symmetrize(sigma));
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > floor) {
        return Err(Error::SingularConditioning { min_eigenvalue: min, floor });
    }
    // Σ_c⁻¹ = V diag(1/λ) Vᵀ, applied as (Σ_kc V) diag(1/λ) (Σ_kc V)ᵀ.
    let mut projected = cross * &eig.eigenvectors;
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        let scale = 1.0 / lambda.sqrt();
        projected.column_mut(j).scale_mut(scale);
    }
    Ok(linalg::symmetrize(&(kept - &projected * projected.transpose())))
}

/// `½ ln det(A Σ Aᵀ + σ² I)` for the target rows `a_yx`.
///
/// Evaluated as `|y|·ln σ + ½ ln det(I + A Σ Aᵀ / σ²)` so that a vanishing
/// coupling yields exactly `|y|·ln σ`.
pub fn conditional_entropy(
    a_yx: &DMatrix<f64>,
    sigma_schur: &DMatrix<f64>,
    sigma: f64,
) -> Result<EntropyValue> {
    if a_yx.ncols() != sigma_schur.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "coupling has {} columns but covariance is {}x{}",
            a_yx.ncols(),
            sigma_schur.nrows(),
            sigma_schur.ncols()
        )));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise scale must be positive, got {sigma}")));
    }
    validate_covariance(sigma_schur)?;
    let ny = a_yx.nrows();
    let mut inner = a_yx * sigma_schur * a_yx.transpose() / (sigma * sigma);
    for i in 0..ny {
        inner[(i, i)] += 1.0;
    }
    let value = ny as f64 * sigma.ln() + 0.5 * linalg::log_det_spd(&linalg::symmetrize(&inner))?;
    Ok(EntropyValue { value, conditioned: false })
}

/// Entropy of the target under full dynamics and under frozen-source dynamics,
/// evaluated at covariance `sigma_t`.
pub fn entropy_pair(
    a: &DMatrix<f64>,
    a_frozen: &DMatrix<f64>,
    noise: f64,
    part: &Partition,
    sigma_t: &DMatrix<f64>,
) -> Result<(EntropyValue, EntropyValue)> {
    let x = part.x();
    let full_schur = schur_complement(sigma_t, &x, part.y())?;
    let full = conditional_entropy(&extract_block(a, part.y(), &x)?, &full_schur, noise)?;
    let frozen_value = if part.x2().is_empty() {
        part.y().len() as f64 * noise.ln()
    } else {
        let rest_schur = schur_complement(sigma_t, part.x2(), part.y())?;
        conditional_entropy(&extract_block(a_frozen, part.y(), part.x2())?, &rest_schur, noise)?
            .value
    };
    Ok((full, EntropyValue { value: frozen_value, conditioned: true }))
}

fn check_dims(sys: &LinearSystem, part: &Partition, sigma: &DMatrix<f64>) -> Result<()> {
    if part.dim() != sys.dim() || sigma.nrows() != sys.dim() {
        return Err(Error::DimensionMismatch(format!(
            "system has {} states, partition covers {}, covariance is {}x{}",
            sys.dim(),
            part.dim(),
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    Ok(())
}

/// One-step transfer from `part.x1` to `part.y` at covariance `sigma_t`.
pub fn transfer_one_step(
    sys: &LinearSystem,
    part: &Partition,
    sigma_t: &CovarianceState,
) -> Result<f64> {
    check_dims(sys, part, sigma_t.sigma())?;
    let (full, frozen) = entropy_pair(sys.a(), sys.a(), sys.noise_scale(), part, sigma_t.sigma())?;
    Ok(full.value - frozen.value)
}

/// Transfer evaluated at the steady-state covariance.
///
/// Fails with [`Error::UnstableSystem`] when the spectral radius is ≥ 1, in
/// which case the transfer grows without bound.
pub fn steady_state_transfer(sys: &LinearSystem, part: &Partition, tol: f64) -> Result<f64> {
    let steady = sysmodel::steady_state_covariance(
        sys,
        sysmodel::DEFAULT_STEADY_TOL,
        sysmodel::DEFAULT_MAX_STEPS,
    )?;
    let value = transfer_one_step(sys, part, &steady)?;
    let next = sysmodel::propagate_covariance(sys, &steady, 1)?;
    let drift = (transfer_one_step(sys, part, &next)? - value).abs();
    if drift > tol {
        return Err(Error::NoConvergence { what: "steady-state transfer".into(), iterations: steady.time() });
    }
    Ok(value)
}

/// Pairwise steady-state transfers: entry `(i, j)` is the transfer from
/// state `i` to state `j` conditioned on all remaining states. The diagonal
/// is zero by convention.
pub fn transfer_matrix(sys: &LinearSystem, tol: f64) -> Result<DMatrix<f64>> {
    let steady = sysmodel::steady_state_covariance(
        sys,
        sysmodel::DEFAULT_STEADY_TOL,
        sysmodel::DEFAULT_MAX_STEPS,
    )?;
    let next = sysmodel::propagate_covariance(sys, &steady, 1)?;
    let n = sys.dim();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let part = Partition::from_source_target(&[i], &[j], n)?;
            let value = transfer_one_step(sys, &part, &steady)?;
            if (transfer_one_step(sys, &part, &next)? - value).abs() > tol {
                return Err(Error::NoConvergence {
                    what: "steady-state transfer".into(),
                    iterations: steady.time(),
                });
            }
            out[(i, j)] = value;
        }
    }
    Ok(out)
}

/// Growth ratio of `|value|` between the first and last element of the
/// trailing `window`, flagged above [`DEFAULT_TREND_THRESHOLD`].
pub fn instability_trend(series: &TransferSeries, window: usize) -> Result<TrendReport> {
    instability_trend_with_threshold(series, window, DEFAULT_TREND_THRESHOLD)
}

pub fn instability_trend_with_threshold(
    series: &TransferSeries,
    window: usize,
    threshold: f64,
) -> Result<TrendReport> {
    if window < 2 || series.len() < window {
        return Err(Error::InsufficientData(format!(
            "trend needs a window of at least 2 within the series (window {window}, length {})",
            series.len()
        )));
    }
    let tail = &series.values()[series.len() - window..];
    let first = tail[0].abs();
    let last = tail[window - 1].abs();
    let ratio = if first > 0.0 {
        last / first
    } else if last > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    Ok(TrendReport { ratio, threshold, flagged: ratio > threshold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    #[test]
    fn schur_examples() {
        let s = schur_complement(&DMatrix::identity(4, 4), &[0, 1], &[2, 3]).unwrap();
        assert_abs_diff_eq!(s, DMatrix::identity(2, 2), epsilon = 1e-15);
        let s = schur_complement(&dmatrix![2.0, 1.0; 1.0, 1.0], &[0], &[1]).unwrap();
        assert_abs_diff_eq!(s[(0, 0)], 1.0, epsilon = 1e-15);
        let s = schur_complement(&dmatrix![1.0, 0.5; 0.5, 1.0], &[0], &[1]).unwrap();
        assert_abs_diff_eq!(s[(0, 0)], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn schur_singular_conditioning() {
        let sigma = dmatrix![1.0, 0.0, 0.0; 0.0, 1.0, 1.0; 0.0, 1.0, 1.0];
        assert!(matches!(
            schur_complement(&sigma, &[0], &[1, 2]),
            Err(Error::SingularConditioning { .. })
        ));
        assert!(schur_complement(&sigma, &[0], &[0]).is_err());
    }

    #[test]
    fn entropy_examples() {
        let h = conditional_entropy(&DMatrix::zeros(2, 3), &DMatrix::identity(3, 3), 1.0).unwrap();
        assert_eq!(h.value, 0.0);
        let h = conditional_entropy(&DMatrix::zeros(1, 2), &DMatrix::identity(2, 2), 2.0).unwrap();
        assert_abs_diff_eq!(h.value, 2.0_f64.ln(), epsilon = 1e-15);
        let h = conditional_entropy(&dmatrix![1.0], &dmatrix![1.0], 1.0).unwrap();
        assert_abs_diff_eq!(h.value, 0.5 * 2.0_f64.ln(), epsilon = 1e-15);
        assert!(matches!(
            conditional_entropy(&dmatrix![1.0], &dmatrix![-1.0], 1.0),
            Err(Error::InvalidCovariance(_))
        ));
    }

    #[test]
    fn entropy_without_coupling_is_exact() {
        for &sigma in &[0.1, 0.3, 1.7, 2.0, 13.0] {
            for ny in 1..6 {
                let h = conditional_entropy(&DMatrix::zeros(ny, 2), &DMatrix::identity(2, 2), sigma)
                    .unwrap();
                assert_eq!(h.value, ny as f64 * sigma.ln());
            }
        }
    }

    #[test]
    fn decoupled_target_has_zero_transfer() {
        let sys = LinearSystem::new(dmatrix![0.5, 0.3, 0.0; 0.1, 0.2, 0.0; 0.0, 0.0, 0.7], 1.0).unwrap();
        let part = Partition::from_source_target(&[0], &[2], 3).unwrap();
        let t = steady_state_transfer(&sys, &part, 1e-9).unwrap();
        assert_eq!(t, 0.0);
    }

    #[test]
    fn lower_triangular_coupling_is_nonzero() {
        let sys = LinearSystem::new(dmatrix![0.5, 0.0; 0.4, 0.3], 1.0).unwrap();
        let m = transfer_matrix(&sys, 1e-9).unwrap();
        assert!(m[(0, 1)] > 1e-3);
        assert_eq!(m[(1, 0)], 0.0);
        assert_eq!(m[(0, 0)], 0.0);
    }

    #[test]
    fn unstable_transfer_errors() {
        let sys = LinearSystem::new(dmatrix![1.1, 0.0; 0.3, 0.2], 1.0).unwrap();
        let part = Partition::from_source_target(&[0], &[1], 2).unwrap();
        assert!(matches!(
            steady_state_transfer(&sys, &part, 1e-9),
            Err(Error::UnstableSystem { .. })
        ));
    }

    #[test]
    fn trend_examples() {
        let flat = TransferSeries::new(vec![0.5; 5], (0..5).map(f64::from).collect(), "a", "b").unwrap();
        let r = instability_trend(&flat, 5).unwrap();
        assert_eq!(r.ratio, 1.0);
        assert!(!r.flagged);
        let doubling = TransferSeries::new(vec![0.1, 0.2, 0.4, 0.8], vec![0.0, 1.0, 2.0, 3.0], "a", "b").unwrap();
        let r = instability_trend(&doubling, 4).unwrap();
        assert_abs_diff_eq!(r.ratio, 8.0, epsilon = 1e-12);
        assert!(r.flagged);
        assert!(matches!(instability_trend(&doubling, 5), Err(Error::InsufficientData(_))));
        assert!(matches!(instability_trend(&doubling, 1), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn series_rejects_non_finite() {
        assert!(TransferSeries::new(vec![f64::INFINITY], vec![0.0], "a", "b").is_err());
        assert!(TransferSeries::new(vec![1.0], vec![], "a", "b").is_err());
    }
}
