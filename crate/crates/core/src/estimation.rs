//! System identification from snapshots and the data-driven transfer
//! pipeline: fit the one-step map, fit the map of a frozen-source dataset,
//! then evaluate the entropy difference under the fitted dynamics.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::infotransfer::{self, TransferSeries};
use crate::linalg;
use crate::sysmodel::{self, CovarianceState, LinearSystem, Partition};

/// Ordered state measurements, one row per uniformly spaced sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotData {
    states: DMatrix<f64>,
    names: Option<Vec<String>>,
}

impl SnapshotData {
    pub fn new(states: DMatrix<f64>) -> Result<Self> {
        if states.nrows() < 2 || states.ncols() == 0 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 samples of at least 1 state, got {}x{}",
                states.nrows(),
                states.ncols()
            )));
        }
        if let Some(k) = states.iter().position(|v| !v.is_finite()) {
            let m = states.nrows();
            return Err(Error::InvalidArgument(format!(
                "non-finite entry at row {}, column {}",
                k % m,
                k / m
            )));
        }
        Ok(Self { states, names: None })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.states.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} states",
                names.len(),
                self.states.ncols()
            )));
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn states(&self) -> &DMatrix<f64> {
        &self.states
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// Number of samples `M`.
    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.states.ncols()
    }

    /// Whether there are enough samples to identify an `N×N` map with a spare pair.
    pub fn is_identifiable(&self) -> bool {
        self.len() >= self.dim() + 2
    }

    /// Samples with `offset` subtracted from every row.
    pub fn deviation_from(&self, offset: &[f64]) -> Result<Self> {
        if offset.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "offset has {} entries for {} states",
                offset.len(),
                self.dim()
            )));
        }
        let mut states = self.states.clone();
        for (j, o) in offset.iter().enumerate() {
            states.column_mut(j).add_scalar_mut(-o);
        }
        Ok(Self { states, names: self.names.clone() })
    }

    /// Samples with each column divided by its (population) standard
    /// deviation; constant columns are left unscaled. Returns the scales.
    pub fn scaled_by_column_std(&self) -> (Self, Vec<f64>) {
        let mut states = self.states.clone();
        let mut scales = Vec::with_capacity(self.dim());
        for mut col in states.column_iter_mut() {
            let mean = col.mean();
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
            let sd = var.sqrt();
            let scale = if sd > 0.0 { sd } else { 1.0 };
            col.unscale_mut(scale);
            scales.push(scale);
        }
        (Self { states, names: self.names.clone() }, scales)
    }
}

/// Residual-to-data RMS ratio below which data count as noise-free.
pub const NOISE_FREE_RATIO: f64 = 1e-10;

/// How the regularized objective is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Regularization {
    /// `‖GK − A‖² + λ‖K‖²`, closed form.
    #[default]
    Ridge,
    /// `‖GK − A‖ + λ‖K‖` with unsquared Frobenius norms, by a scalar
    /// root-find over the equivalent ridge weight.
    Unsquared,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationConfig {
    /// Regularization weight.
    pub lambda: f64,
    /// Process-noise bound (three standard deviations). `None` uses three
    /// times the residual standard deviation of the fitted map.
    pub noise_bound: Option<f64>,
    pub regularization: Regularization,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self { lambda: 0.05, noise_bound: None, regularization: Regularization::Ridge }
    }
}

impl EstimationConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self { lambda, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if let Some(b) = self.noise_bound {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::InvalidArgument(format!("noise bound must be >= 0, got {b}")));
            }
        }
        Ok(())
    }
}

/// Input/output pairs of the frozen-source dataset: each output equals the
/// next sample except on the frozen coordinates, which keep the input value.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenDataset {
    inputs: DMatrix<f64>,
    outputs: DMatrix<f64>,
    frozen: Vec<usize>,
}

impl FrozenDataset {
    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn outputs(&self) -> &DMatrix<f64> {
        &self.outputs
    }

    pub fn frozen(&self) -> &[usize] {
        &self.frozen
    }

    pub fn pair_count(&self) -> usize {
        self.inputs.nrows()
    }

    /// Every pair contributes two points.
    pub fn point_count(&self) -> usize {
        2 * self.inputs.nrows()
    }
}

/// Fitted one-step map plus the residual scale it leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedMap {
    /// Column convention: `z_{t+1} ≈ a z_t`.
    pub a: DMatrix<f64>,
    /// RMS of the one-step residuals over all entries.
    pub residual_std: f64,
}

fn consecutive_pairs(data: &SnapshotData) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = data.len();
    let z = data.states();
    (z.rows(0, m - 1).into_owned(), z.rows(1, m - 1).into_owned())
}

fn data_matrices_from_pairs(
    inputs: &DMatrix<f64>,
    outputs: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let count = inputs.nrows() as f64;
    (inputs.transpose() * inputs / count, inputs.transpose() * outputs / count)
}

/// Averaged Gram and cross matrices over consecutive pairs:
/// `G = mean zₘᵀzₘ`, `A = mean zₘᵀzₘ₊₁` with `z` as row vectors.
pub fn build_data_matrices(data: &SnapshotData) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if data.len() < 2 {
        return Err(Error::InsufficientData("need at least two samples".into()));
    }
    let (x, y) = consecutive_pairs(data);
    Ok(data_matrices_from_pairs(&x, &y))
}

fn solve_exact(g: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(linalg::symmetrize(g));
    let norm = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 1e-12 * norm) || norm == 0.0 {
        return Err(Error::RankDeficient);
    }
    g.clone().lu().solve(a).ok_or(Error::RankDeficient)
}

fn solve_ridge(g: &DMatrix<f64>, a: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if lambda == 0.0 {
        return solve_exact(g, a);
    }
    let n = g.nrows();
    let normal = g.transpose() * g + DMatrix::identity(n, n) * lambda;
    normal
        .cholesky()
        .map(|c| c.solve(&(g.transpose() * a)))
        .ok_or(Error::RankDeficient)
}

/// Minimizer of `‖GK − A‖_F + λ‖K‖_F`.
///
/// Stationarity gives `(GᵀG + μI)K = GᵀA` with `μ = λ‖GK − A‖/‖K‖`; the
/// scalar `μ` is found by bisection in log space on
/// `ψ(μ) = μ‖K(μ)‖ − λ‖GK(μ) − A‖`, which is increasing in `μ`.
fn solve_unsquared(g: &DMatrix<f64>, a: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if lambda == 0.0 {
        return solve_exact(g, a);
    }
    let n = g.nrows();
    let a_norm = a.norm();
    let gta = g.transpose() * a;
    if a_norm == 0.0 || gta.norm() <= lambda * a_norm {
        return Ok(DMatrix::zeros(n, a.ncols()));
    }
    let svd = g.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let ut_a = u.transpose() * a;
    let k_of = |mu: f64| -> DMatrix<f64> {
        let mut scaled = ut_a.clone();
        for (i, s) in svd.singular_values.iter().enumerate() {
            let w = if s * s + mu > 0.0 { s / (s * s + mu) } else { 0.0 };
            scaled.row_mut(i).scale_mut(w);
        }
        v_t.transpose() * scaled
    };
    let psi = |mu: f64| -> f64 {
        let k = k_of(mu);
        mu * k.norm() - lambda * (g * &k - a).norm()
    };

    let s_max = svd.singular_values.max();
    let mut hi = (s_max * s_max).max(f64::MIN_POSITIVE);
    let mut guard = 0;
    while psi(hi) <= 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 2000 {
            return Err(Error::NoConvergence { what: "unsquared regularization bracket".into(), iterations: guard });
        }
    }
    let mut lo = hi;
    guard = 0;
    while psi(lo) > 0.0 {
        lo *= 0.5;
        guard += 1;
        if lo < 1e-300 || guard > 2000 {
            // ψ stays positive down to zero weight: the exact solution is optimal.
            return solve_exact(g, a);
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if psi(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    Ok(k_of((lo * hi).sqrt()))
}

fn fit_pairs(
    inputs: &DMatrix<f64>,
    outputs: &DMatrix<f64>,
    config: &EstimationConfig,
) -> Result<FittedMap> {
    config.validate()?;
    let (g, cross) = data_matrices_from_pairs(inputs, outputs);
    let k = match config.regularization {
        Regularization::Ridge => solve_ridge(&g, &cross, config.lambda)?,
        Regularization::Unsquared => solve_unsquared(&g, &cross, config.lambda)?,
    };
    let residual = outputs - inputs * &k;
    let residual_std = (residual.norm_squared() / residual.len() as f64).sqrt();
    Ok(FittedMap { a: k.transpose(), residual_std })
}

/// Fitted one-step map together with its residual scale.
pub fn fit_system(data: &SnapshotData, config: &EstimationConfig) -> Result<FittedMap> {
    let (x, y) = consecutive_pairs(data);
    fit_pairs(&x, &y, config)
}

/// Regularized estimate of the one-step map in the column convention
/// `z_{t+1} = Ā z_t`.
pub fn estimate_system(data: &SnapshotData, config: &EstimationConfig) -> Result<DMatrix<f64>> {
    fit_system(data, config).map(|f| f.a)
}

fn validate_frozen(frozen: &[usize], n: usize) -> Result<()> {
    if frozen.is_empty() {
        return Err(Error::DegeneratePartition("no coordinates are frozen".into()));
    }
    if let Some(&i) = frozen.iter().find(|&&i| i >= n) {
        return Err(Error::IndexError { index: i, dim: n });
    }
    let mut distinct = frozen.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() != frozen.len() {
        return Err(Error::DegeneratePartition("frozen coordinates repeat".into()));
    }
    if distinct.len() == n {
        return Err(Error::DegeneratePartition("every coordinate is frozen".into()));
    }
    Ok(())
}

/// Pairs `(z_{t−1}, z_t)` for `t = 1..M−1`, with the frozen coordinates of
/// each output overwritten by the input's values.
pub fn build_frozen_dataset(data: &SnapshotData, frozen: &[usize]) -> Result<FrozenDataset> {
    validate_frozen(frozen, data.dim())?;
    let (inputs, mut outputs) = consecutive_pairs(data);
    for &j in frozen {
        outputs.set_column(j, &inputs.column(j));
    }
    Ok(FrozenDataset { inputs, outputs, frozen: frozen.to_vec() })
}

pub fn fit_frozen_system(
    data: &SnapshotData,
    frozen: &[usize],
    config: &EstimationConfig,
) -> Result<FittedMap> {
    let set = build_frozen_dataset(data, frozen)?;
    fit_pairs(&set.inputs, &set.outputs, config)
}

/// Estimate of the map under which the frozen coordinates hold still.
pub fn estimate_frozen_system(
    data: &SnapshotData,
    frozen: &[usize],
    config: &EstimationConfig,
) -> Result<DMatrix<f64>> {
    fit_frozen_system(data, frozen, config).map(|f| f.a)
}

/// Result of [`data_driven_transfer`].
#[derive(Debug, Clone, PartialEq)]
pub struct DataDrivenTransfer {
    /// Transfer at each step of the covariance recursion.
    pub series: TransferSeries,
    /// Value at the steady-state covariance, when the estimate is stable.
    pub steady_state: Option<f64>,
    pub a_estimate: DMatrix<f64>,
    pub a_frozen: DMatrix<f64>,
    /// Process-noise standard deviation used in the entropies.
    pub noise_scale: f64,
    pub spectral_radius: f64,
}

fn label(indices: &[usize]) -> String {
    indices.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

/// Transfer from `part.x1` to `part.y` computed purely from snapshots.
///
/// Fits `Ā` to the data and `Ā_frozen` to the frozen-source dataset, runs
/// the covariance recursion under `Ā` from `sigma0`, and at each step takes
/// the difference of the target's conditional entropies: the full one uses
/// the `(y, x)` rows/columns of `Ā`, the frozen one the `(y, x2)` block of
/// `Ā_frozen`. The noise scale is `noise_bound / 3`.
///
/// With `horizon = Some(h)` the series has `h` values and the steady-state
/// value is attached when `Ā` is stable. With `horizon = None` the series
/// holds the single steady-state value, and an unstable estimate is an
/// error.
pub fn data_driven_transfer(
    data: &SnapshotData,
    part: &Partition,
    config: &EstimationConfig,
    sigma0: &CovarianceState,
    horizon: Option<usize>,
) -> Result<DataDrivenTransfer> {
    let n = data.dim();
    if part.dim() != n || sigma0.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "data has {n} states, partition covers {}, covariance is {}x{}",
            part.dim(),
            sigma0.dim(),
            sigma0.dim()
        )));
    }
    let fitted = fit_system(data, config)?;
    let frozen = fit_frozen_system(data, part.x1(), config)?;
    // Residuals at round-off level relative to the data mean noise-free data.
    let data_rms = (data.states().norm_squared() / data.states().len() as f64).sqrt();
    let noise_scale = match config.noise_bound {
        Some(b) => b / 3.0,
        None if fitted.residual_std <= NOISE_FREE_RATIO * data_rms => 0.0,
        None => fitted.residual_std,
    };
    if !(noise_scale > 0.0) {
        return Err(Error::InvalidArgument(
            "noise bound is zero (noise-free data); supply a positive noise bound".into(),
        ));
    }
    let sys = LinearSystem::new(fitted.a.clone(), noise_scale)?;
    let radius = sys.spectral_radius()?;

    let entropy_gap = |sigma: &DMatrix<f64>| -> Result<f64> {
        let (full, frozen_h) =
            infotransfer::entropy_pair(&fitted.a, &frozen.a, noise_scale, part, sigma)?;
        Ok(full.value - frozen_h.value)
    };

    let steady_state = if radius < 1.0 {
        let steady = sysmodel::steady_state_covariance(
            &sys,
            sysmodel::DEFAULT_STEADY_TOL,
            sysmodel::DEFAULT_MAX_STEPS,
        )?;
        Some(entropy_gap(steady.sigma())?)
    } else {
        None
    };

    let (values, labels) = match horizon {
        Some(h) => {
            let mut values = Vec::with_capacity(h);
            let mut sigma = sigma0.clone();
            for t in 0..h {
                if t > 0 {
                    sigma = sysmodel::propagate_covariance(&sys, &sigma, 1)?;
                }
                let value = entropy_gap(sigma.sigma())?;
                if !value.is_finite() {
                    return Err(Error::NoConvergence {
                        what: format!("transfer recursion (estimate spectral radius {radius:.6})"),
                        iterations: t,
                    });
                }
                values.push(value);
            }
            let labels = (0..h).map(|t| (sigma0.time() + t) as f64).collect();
            (values, labels)
        }
        None => match steady_state {
            Some(v) => (vec![v], vec![f64::INFINITY]),
            None => {
                return Err(Error::NoConvergence {
                    what: format!("steady-state transfer (estimate spectral radius {radius:.6} >= 1)"),
                    iterations: 0,
                })
            }
        },
    };
    // Steady-state labels use +∞ as "t → ∞"; only values must be finite.
    let series = TransferSeries::new(values, labels, label(part.x1()), label(part.y()))?;
    Ok(DataDrivenTransfer {
        series,
        steady_state,
        a_estimate: fitted.a,
        a_frozen: frozen.a,
        noise_scale,
        spectral_radius: radius,
    })
}
