//! Discrete-time linear stochastic systems `z(t+1) = A z(t) + σ ξ(t)`,
//! their partition into source / conditioning / target subspaces, and the
//! propagation of the state covariance.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

/// Default tolerance of [`steady_state_covariance`].
pub const DEFAULT_STEADY_TOL: f64 = 1e-10;
/// Default step budget of [`steady_state_covariance`].
pub const DEFAULT_MAX_STEPS: usize = 100_000;

/// One-step map plus isotropic process-noise scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    noise_scale: f64,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, noise_scale: f64) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "system matrix must be square and nonempty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("system matrix has non-finite entries".into()));
        }
        if !(noise_scale > 0.0 && noise_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise scale must be positive and finite, got {noise_scale}"
            )));
        }
        Ok(Self { a, noise_scale })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        spectral_radius(&self.a)
    }
}

/// Ordered split of the state indices into source `x1`, conditioning
/// remainder `x2` and target `y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    x1: Vec<usize>,
    x2: Vec<usize>,
    y: Vec<usize>,
}

impl Partition {
    /// Validates that the three lists are disjoint and together cover `0..n`.
    pub fn new(x1: Vec<usize>, x2: Vec<usize>, y: Vec<usize>, n: usize) -> Result<Self> {
        if x1.is_empty() || y.is_empty() {
            return Err(Error::InvalidPartition("source and target must be nonempty".into()));
        }
        let mut seen = vec![false; n];
        for &i in x1.iter().chain(&x2).chain(&y) {
            if i >= n {
                return Err(Error::IndexError { index: i, dim: n });
            }
            if seen[i] {
                return Err(Error::InvalidPartition(format!("index {i} appears more than once")));
            }
            seen[i] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!("index {missing} is not assigned")));
        }
        Ok(Self { x1, x2, y })
    }

    /// Source and target as given; every other index (ascending) conditions.
    pub fn from_source_target(source: &[usize], target: &[usize], n: usize) -> Result<Self> {
        let rest = (0..n)
            .filter(|i| !source.contains(i) && !target.contains(i))
            .collect();
        Self::new(source.to_vec(), rest, target.to_vec(), n)
    }

    pub fn x1(&self) -> &[usize] {
        &self.x1
    }

    pub fn x2(&self) -> &[usize] {
        &self.x2
    }

    pub fn y(&self) -> &[usize] {
        &self.y
    }

    /// The combined non-target block `x = (x1, x2)`.
    pub fn x(&self) -> Vec<usize> {
        self.x1.iter().chain(&self.x2).copied().collect()
    }

    pub fn dim(&self) -> usize {
        self.x1.len() + self.x2.len() + self.y.len()
    }
}

/// Symmetric positive semidefinite state covariance at a time index.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceState {
    sigma: DMatrix<f64>,
    time: usize,
}

impl CovarianceState {
    pub fn new(sigma: DMatrix<f64>, time: usize) -> Result<Self> {
        validate_covariance(&sigma)?;
        Ok(Self { sigma, time })
    }

    pub fn zeros(n: usize) -> Self {
        Self { sigma: DMatrix::zeros(n, n), time: 0 }
    }

    pub fn identity(n: usize) -> Self {
        Self { sigma: DMatrix::identity(n, n), time: 0 }
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }
}

/// Checks symmetry (relative 1e-10) and positive semidefiniteness
/// (eigenvalues ≥ −1e-10·‖Σ‖).
pub fn validate_covariance(sigma: &DMatrix<f64>) -> Result<()> {
    if !sigma.is_square() {
        return Err(Error::InvalidCovariance(format!(
            "covariance must be square, got {}x{}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    if sigma.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidCovariance("non-finite entries".into()));
    }
    let scale = sigma.amax();
    let asym = (sigma - sigma.transpose()).amax();
    if asym > 1e-10 * scale {
        return Err(Error::InvalidCovariance(format!("not symmetric (max asymmetry {asym:e})")));
    }
    let sym = linalg::symmetrize(sigma);
    let eig = nalgebra::SymmetricEigen::new(sym).eigenvalues;
    let norm = eig.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if sigma.nrows() > 0 && min < -1e-10 * norm {
        return Err(Error::InvalidCovariance(format!("not positive semidefinite (eigenvalue {min:e})")));
    }
    Ok(())
}

/// Submatrix `a[rows, cols]`, preserving the order of both index lists.
pub fn extract_block(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> Result<DMatrix<f64>> {
    if let Some(&i) = rows.iter().find(|&&i| i >= a.nrows()) {
        return Err(Error::IndexError { index: i, dim: a.nrows() });
    }
    if let Some(&j) = cols.iter().find(|&&j| j >= a.ncols()) {
        return Err(Error::IndexError { index: j, dim: a.ncols() });
    }
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |r, c| a[(rows[r], cols[c])]))
}

fn covariance_step(a: &DMatrix<f64>, noise_var: f64, sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let mut next = a * sigma * a.transpose();
    for i in 0..next.nrows() {
        next[(i, i)] += noise_var;
    }
    linalg::symmetrize(&next)
}

/// Iterates `Σ ← A Σ Aᵀ + σ² I` for `steps` steps.
pub fn propagate_covariance(
    sys: &LinearSystem,
    sigma0: &CovarianceState,
    steps: usize,
) -> Result<CovarianceState> {
    if sigma0.dim() != sys.dim() {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {0}x{0} but system has {1} states",
            sigma0.dim(),
            sys.dim()
        )));
    }
    validate_covariance(&sigma0.sigma)?;
    let noise_var = sys.noise_scale * sys.noise_scale;
    let mut sigma = sigma0.sigma.clone();
    for _ in 0..steps {
        sigma = covariance_step(&sys.a, noise_var, &sigma);
    }
    Ok(CovarianceState { sigma, time: sigma0.time + steps })
}

/// Relative fixed-point residual `‖AΣAᵀ + σ²I − Σ‖_F / ‖Σ‖_F`.
pub fn fixed_point_residual(sys: &LinearSystem, sigma: &DMatrix<f64>) -> f64 {
    let noise_var = sys.noise_scale * sys.noise_scale;
    let next = covariance_step(&sys.a, noise_var, sigma);
    (next - sigma).norm() / sigma.norm().max(f64::MIN_POSITIVE)
}

/// Steady-state covariance of a Schur-stable system.
///
/// Sums the covariance series by doubling (`S ← S + P S Pᵀ`, `P ← P²`),
/// which reaches `2^k` recursion steps after `k` products; the result is
/// accepted only once the fixed-point residual is within `tol`.
/// `max_steps` bounds the number of equivalent recursion steps.
pub fn steady_state_covariance(
    sys: &LinearSystem,
    tol: f64,
    max_steps: usize,
) -> Result<CovarianceState> {
    let radius = sys.spectral_radius()?;
    if radius >= 1.0 {
        return Err(Error::UnstableSystem { spectral_radius: radius });
    }
    let n = sys.dim();
    let noise_var = sys.noise_scale * sys.noise_scale;
    let mut sigma = DMatrix::identity(n, n) * noise_var;
    let mut power = sys.a.clone();
    let mut steps = 1usize;
    loop {
        if fixed_point_residual(sys, &sigma) <= tol {
            return Ok(CovarianceState { sigma, time: steps });
        }
        if steps >= max_steps {
            return Err(Error::NoConvergence {
                what: "steady-state covariance".into(),
                iterations: steps,
            });
        }
        sigma = linalg::symmetrize(&(&sigma + &power * &sigma * power.transpose()));
        power = &power * &power;
        steps = steps.saturating_mul(2);
    }
}

/// Largest eigenvalue modulus. Non-finite input yields `+∞`.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    if a.iter().any(|v| !v.is_finite()) {
        return Ok(f64::INFINITY);
    }
    Ok(linalg::eigenvalues(a)?
        .iter()
        .fold(0.0_f64, |m, l| m.max(l.norm())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    #[test]
    fn block_extraction_preserves_order() {
        let a = dmatrix![1.0, 2.0; 3.0, 4.0];
        assert_eq!(extract_block(&a, &[1], &[0, 1]).unwrap(), dmatrix![3.0, 4.0]);
        assert_eq!(extract_block(&a, &[1, 0], &[1]).unwrap(), dmatrix![4.0; 2.0]);
        assert_eq!(extract_block(&DMatrix::identity(3, 3), &[0], &[1]).unwrap(), dmatrix![0.0]);
        let coupled = dmatrix![0.4, 0.2; 0.0, 0.5];
        assert_eq!(extract_block(&coupled, &[0], &[1]).unwrap(), dmatrix![0.2]);
        assert!(matches!(
            extract_block(&a, &[2], &[0]),
            Err(Error::IndexError { index: 2, dim: 2 })
        ));
    }

    #[test]
    fn one_step_from_zero_is_noise() {
        let sys = LinearSystem::new(dmatrix![0.4, 0.2; 0.0, 0.5], 1.0).unwrap();
        let s = propagate_covariance(&sys, &CovarianceState::zeros(2), 1).unwrap();
        assert_eq!(s.sigma(), &DMatrix::<f64>::identity(2, 2));
        assert_eq!(s.time(), 1);

        let zero = LinearSystem::new(DMatrix::zeros(3, 3), 1.0).unwrap();
        let s = propagate_covariance(&zero, &CovarianceState::zeros(3), 17).unwrap();
        assert_eq!(s.sigma(), &DMatrix::<f64>::identity(3, 3));
    }

    #[test]
    fn rejects_asymmetric_initial_covariance() {
        let sys = LinearSystem::new(DMatrix::zeros(2, 2), 1.0).unwrap();
        let bad = CovarianceState { sigma: dmatrix![1.0, 0.5; 0.0, 1.0], time: 0 };
        assert!(matches!(propagate_covariance(&sys, &bad, 1), Err(Error::InvalidCovariance(_))));
        assert!(CovarianceState::new(dmatrix![1.0, 0.0; 0.0, -1.0], 0).is_err());
    }

    #[test]
    fn steady_state_of_pure_noise() {
        let sys = LinearSystem::new(DMatrix::zeros(3, 3), 2.0).unwrap();
        let s = steady_state_covariance(&sys, DEFAULT_STEADY_TOL, DEFAULT_MAX_STEPS).unwrap();
        assert_abs_diff_eq!(s.sigma(), &(DMatrix::identity(3, 3) * 4.0), epsilon = 1e-14);
    }

    #[test]
    fn steady_state_rejects_unstable() {
        let sys = LinearSystem::new(dmatrix![0.4, 0.2; 0.0, 1.01], 1.0).unwrap();
        assert!(matches!(
            steady_state_covariance(&sys, DEFAULT_STEADY_TOL, DEFAULT_MAX_STEPS),
            Err(Error::UnstableSystem { .. })
        ));
    }

    #[test]
    fn steady_state_step_budget() {
        let sys = LinearSystem::new(dmatrix![0.999999], 1.0).unwrap();
        assert!(matches!(
            steady_state_covariance(&sys, 1e-12, 8),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn spectral_radius_examples() {
        assert_abs_diff_eq!(spectral_radius(&DMatrix::identity(4, 4)).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(spectral_radius(&dmatrix![0.4, 0.2; 0.0, 0.99]).unwrap(), 0.99, epsilon = 1e-14);
        assert_abs_diff_eq!(spectral_radius(&dmatrix![0.0, 1.0; -1.0, 0.0]).unwrap(), 1.0, epsilon = 1e-14);
        assert!(spectral_radius(&dmatrix![f64::NAN]).unwrap().is_infinite());
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![0], vec![], vec![1], 2).is_ok());
        assert!(Partition::new(vec![], vec![0], vec![1], 2).is_err());
        assert!(Partition::new(vec![0], vec![0], vec![1], 2).is_err());
        assert!(Partition::new(vec![0], vec![], vec![1], 3).is_err());
        assert!(matches!(
            Partition::new(vec![0], vec![], vec![5], 2),
            Err(Error::IndexError { .. })
        ));
        let p = Partition::from_source_target(&[3, 1], &[0], 5).unwrap();
        assert_eq!(p.x2(), &[2, 4]);
        assert_eq!(p.x(), vec![3, 1, 2, 4]);
    }

    #[test]
    fn system_validation() {
        assert!(LinearSystem::new(DMatrix::zeros(2, 3), 1.0).is_err());
        assert!(LinearSystem::new(DMatrix::zeros(2, 2), 0.0).is_err());
        assert!(LinearSystem::new(DMatrix::zeros(2, 2), -1.0).is_err());
    }
}
