//! Reference computations used only by tests. They deliberately avoid the
//! library's code paths: steady states come from a Kronecker-vectorized
//! linear solve, transfers from the joint Gaussian of consecutive target
//! samples with full-matrix inverses.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Solves `Σ = A Σ Aᵀ + σ² I` via `(I − A⊗A) vec Σ = σ² vec I`.
pub fn lyapunov_kron(a: &DMatrix<f64>, sigma: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let lhs = DMatrix::identity(n * n, n * n) - a.kronecker(a);
    let rhs = DVector::from_column_slice((DMatrix::<f64>::identity(n, n) * sigma * sigma).as_slice());
    let v = lhs.lu().solve(&rhs).expect("stable system");
    DMatrix::from_column_slice(n, n, v.as_slice())
}

fn pick(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// `½ ln det Cov(y(t+1) | y(t))` for `y(t+1) = coupling·z(t) + σ ξ`.
fn conditional_target_entropy(coupling: &DMatrix<f64>, sigma_t: &DMatrix<f64>, y: &[usize], noise: f64) -> f64 {
    let ny = y.len();
    let c11 = coupling * sigma_t * coupling.transpose() + DMatrix::identity(ny, ny) * noise * noise;
    let c12 = coupling * pick(sigma_t, &(0..sigma_t.nrows()).collect::<Vec<_>>(), y);
    let syy = pick(sigma_t, y, y);
    let cond = &c11 - &c12 * syy.try_inverse().expect("invertible target block") * c12.transpose();
    0.5 * cond.determinant().ln()
}

/// Transfer from `x1` to `y` at covariance `sigma_t`: entropy of the target
/// under full dynamics minus that with the source columns removed.
pub fn transfer_oracle(a: &DMatrix<f64>, noise: f64, sigma_t: &DMatrix<f64>, x1: &[usize], y: &[usize]) -> f64 {
    let full = pick(a, y, &(0..a.ncols()).collect::<Vec<_>>());
    let mut frozen = full.clone();
    for &j in x1 {
        frozen.column_mut(j).fill(0.0);
    }
    conditional_target_entropy(&full, sigma_t, y, noise) - conditional_target_entropy(&frozen, sigma_t, y, noise)
}

pub fn steady_transfer_oracle(a: &DMatrix<f64>, noise: f64, x1: &[usize], y: &[usize]) -> f64 {
    transfer_oracle(a, noise, &lyapunov_kron(a, noise), x1, y)
}

/// The two-state example: a state fed by a second, autonomous state of
/// pole `mu`.
pub fn coupled_pair(mu: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.4, 0.2, 0.0, mu])
}

/// Random matrix rescaled to the requested spectral radius.
pub fn random_with_radius(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let rho = m.complex_eigenvalues().iter().fold(0.0_f64, |acc, l| acc.max(l.norm()));
    m * (radius / rho)
}

/// Random matrix whose off-diagonal couplings are each absent with
/// probability `sparsity` and otherwise of magnitude in `[0.2, 1]` before
/// rescaling to spectral radius `radius`, so that present couplings are
/// structurally nonzero rather than accidentally tiny.
pub fn random_sparse_with_radius(rng: &mut ChaCha8Rng, n: usize, radius: f64, sparsity: f64) -> DMatrix<f64> {
    loop {
        let m = DMatrix::from_fn(n, n, |i, j| {
            let magnitude = rng.random_range(0.2..1.0);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            if i != j && rng.random_bool(sparsity) { 0.0 } else { sign * magnitude }
        });
        let rho = m.complex_eigenvalues().iter().fold(0.0_f64, |acc, l| acc.max(l.norm()));
        if rho > 0.0 {
            return m * (radius / rho);
        }
    }
}

/// Simulated trajectory of `z(t+1) = A z(t) + σ ξ(t)` started at `z0`.
pub fn simulate_linear(a: &DMatrix<f64>, noise: f64, z0: &[f64], m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = DMatrix::zeros(m, n);
    let mut z = DVector::from_column_slice(z0);
    for t in 0..m {
        out.set_row(t, &z.transpose());
        let xi = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        z = a * &z + xi * noise;
    }
    out
}

/// Stationary start for a stable system: a draw from its steady state.
pub fn stationary_draw(a: &DMatrix<f64>, noise: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let chol = lyapunov_kron(a, noise).cholesky().expect("positive definite");
    let xi = DVector::from_fn(a.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
    (chol.l() * xi).iter().copied().collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}
