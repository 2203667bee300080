use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::three_bus::{ThreeBusModel, ThreeBusState, STATE_NAMES};
use crate::error::{Error, Result};
use crate::estimation::SnapshotData;

const DIVERGENCE_NORM: f64 = 1e6;

/// Euler–Maruyama settings. Samples are recorded every `dt`; each sampling
/// interval is split into equal integration steps no longer than `max_step`
/// so that stiff operating points stay within the explicit scheme's
/// stability region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub dt: f64,
    pub max_step: f64,
    /// Additive noise intensity; each integration step of length `h` adds
    /// `noise_sigma·√h` times a standard normal to every state.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { dt: 0.01, max_step: 0.002, noise_sigma: 0.0, seed: 0 }
    }
}

impl SimulationConfig {
    pub fn substeps(&self) -> usize {
        ((self.dt / self.max_step) - 1e-9).ceil().max(1.0) as usize
    }
}

/// Simulates `steps` samples (the first is `state0`) of the default model.
pub fn simulate(
    state0: &ThreeBusState,
    q1: f64,
    steps: usize,
    dt: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<SnapshotData> {
    let config = SimulationConfig { dt, noise_sigma, seed, ..SimulationConfig::default() };
    simulate_with(&ThreeBusModel::default(), state0, q1, steps, &config)
}

pub fn simulate_with(
    model: &ThreeBusModel,
    state0: &ThreeBusState,
    q1: f64,
    steps: usize,
    config: &SimulationConfig,
) -> Result<SnapshotData> {
    if steps < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 samples, got {steps}")));
    }
    if !(config.dt > 0.0 && config.max_step > 0.0) {
        return Err(Error::InvalidArgument("dt and max_step must be positive".into()));
    }
    if !(config.noise_sigma >= 0.0 && config.noise_sigma.is_finite()) {
        return Err(Error::InvalidArgument("noise_sigma must be nonnegative".into()));
    }
    if !state0.is_finite() {
        return Err(Error::InvalidArgument("initial state must be finite".into()));
    }
    let substeps = config.substeps();
    let h = config.dt / substeps as f64;
    let kick = config.noise_sigma * h.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut out = DMatrix::zeros(steps, 4);
    let mut x = state0.to_array();
    out.row_mut(0).copy_from_slice(&x);
    for step in 1..steps {
        for _ in 0..substeps {
            let f = model.rhs(&ThreeBusState::from_slice(&x), q1);
            for i in 0..4 {
                let noise: f64 = if kick > 0.0 { StandardNormal.sample(&mut rng) } else { 0.0 };
                x[i] += h * f[i] + kick * noise;
            }
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm <= DIVERGENCE_NORM) {
                return Err(Error::Diverged { step });
            }
        }
        out.row_mut(step).copy_from_slice(&x);
    }
    SnapshotData::new(out)?.with_names(STATE_NAMES.iter().map(|s| s.to_string()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::powermodels::three_bus::{find_equilibrium, DEFAULT_GUESS};

    #[test]
    fn substep_count() {
        let c = SimulationConfig { dt: 0.01, max_step: 0.002, ..Default::default() };
        assert_eq!(c.substeps(), 5);
        let c = SimulationConfig { dt: 0.001, max_step: 0.002, ..Default::default() };
        assert_eq!(c.substeps(), 1);
        let c = SimulationConfig { dt: 0.5, max_step: 0.002, ..Default::default() };
        assert_eq!(c.substeps(), 250);
    }

    #[test]
    fn noise_free_equilibrium_is_fixed() {
        let eq = find_equilibrium(1.0, &DEFAULT_GUESS).unwrap();
        let data = simulate(&eq, 1.0, 200, 0.01, 0.0, 3).unwrap();
        let start = eq.to_array();
        for row in data.states().row_iter() {
            for (a, b) in row.iter().zip(start) {
                assert!((a - b).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn seeded_runs_are_identical() {
        let eq = find_equilibrium(1.0, &DEFAULT_GUESS).unwrap();
        let a = simulate(&eq, 1.0, 50, 0.01, 0.05, 11).unwrap();
        let b = simulate(&eq, 1.0, 50, 0.01, 0.05, 11).unwrap();
        let c = simulate(&eq, 1.0, 50, 0.01, 0.05, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 50);
    }

    #[test]
    fn divergence_is_reported() {
        let far = ThreeBusState { delta_g: 0.0, omega: 0.0, delta_l: 0.0, v: 50.0 };
        assert!(matches!(simulate(&far, 1.0, 100, 0.01, 0.0, 0), Err(Error::Diverged { .. })));
    }
}
