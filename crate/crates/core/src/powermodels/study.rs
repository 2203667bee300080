//! Data-driven transfers across a set of operating points: perturb each
//! equilibrium, record a short noisy trajectory, and estimate transfers
//! between generator and load states from that trajectory alone.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::simulate::{simulate_with, SimulationConfig};
use super::sweep::OperatingPoint;
use super::three_bus::{ThreeBusModel, ThreeBusState};
use crate::error::{Error, Result};
use crate::estimation::{data_driven_transfer, EstimationConfig};
use crate::sysmodel::{CovarianceState, Partition};

/// Generator angle and speed.
pub const GENERATOR_STATES: [usize; 2] = [0, 1];
/// Load angle and voltage.
pub const LOAD_STATES: [usize; 2] = [2, 3];

/// Data-collection and estimation settings for one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyProtocol {
    /// Samples recorded per operating point.
    pub samples: usize,
    /// Sampling interval.
    pub dt: f64,
    /// Longest integration step.
    pub max_step: f64,
    pub noise_sigma: f64,
    /// Offset added to every state of the equilibrium to start the run.
    pub initial_offset: f64,
    /// Divide each recorded (deviation) column by its standard deviation.
    pub standardize: bool,
    pub estimation: EstimationConfig,
}

impl Default for StudyProtocol {
    fn default() -> Self {
        Self {
            samples: 30,
            dt: 0.5,
            max_step: 0.002,
            noise_sigma: 1e-4,
            initial_offset: 0.01,
            standardize: true,
            estimation: EstimationConfig::default(),
        }
    }
}

/// Steady-state transfers estimated at one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointTransfers {
    pub q1: f64,
    /// Entry `(i, j)`: transfer from state `i` to state `j`; zero diagonal.
    pub pairwise: DMatrix<f64>,
    pub generator_to_load: f64,
    pub load_to_generator: f64,
    /// Spectral radius of the estimated one-step map.
    pub spectral_radius: f64,
}

impl PointTransfers {
    /// `Σ_j |T(i → j)|`.
    pub fn total_from(&self, i: usize) -> f64 {
        self.pairwise.row(i).iter().map(|v| v.abs()).sum()
    }
}

/// Runs the protocol at one operating point.
pub fn point_transfers(
    model: &ThreeBusModel,
    op: &OperatingPoint,
    protocol: &StudyProtocol,
    seed: u64,
) -> Result<PointTransfers> {
    let eq = op.equilibrium.to_array();
    let start = ThreeBusState::from_slice(&eq.map(|v| v + protocol.initial_offset));
    let sim = SimulationConfig {
        dt: protocol.dt,
        max_step: protocol.max_step,
        noise_sigma: protocol.noise_sigma,
        seed,
    };
    let raw = simulate_with(model, &start, op.q1, protocol.samples, &sim)?;
    let mut data = raw.deviation_from(&eq)?;
    if protocol.standardize {
        data = data.scaled_by_column_std().0;
    }
    let n = data.dim();
    let sigma0 = CovarianceState::identity(n);
    let steady = |source: &[usize], target: &[usize]| -> Result<(f64, f64)> {
        let part = Partition::from_source_target(source, target, n)?;
        let r = data_driven_transfer(&data, &part, &protocol.estimation, &sigma0, None)?;
        Ok((r.series.values()[0], r.spectral_radius))
    };
    let mut pairwise = DMatrix::zeros(n, n);
    let mut radius = f64::NAN;
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let (value, r) = steady(&[i], &[j])?;
            pairwise[(i, j)] = value;
            radius = r;
        }
    }
    let (generator_to_load, _) = steady(&GENERATOR_STATES, &LOAD_STATES)?;
    let (load_to_generator, _) = steady(&LOAD_STATES, &GENERATOR_STATES)?;
    Ok(PointTransfers { q1: op.q1, pairwise, generator_to_load, load_to_generator, spectral_radius: radius })
}

/// Runs the protocol at every point with seeds `base_seed + k`, using up to
/// `jobs` worker threads. Results keep the order of `points`.
pub fn study_transfers(
    model: &ThreeBusModel,
    points: &[OperatingPoint],
    protocol: &StudyProtocol,
    base_seed: u64,
    jobs: usize,
) -> Result<Vec<Result<PointTransfers>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(k, op)| point_transfers(model, op, protocol, base_seed.wrapping_add(k as u64)))
            .collect()
    }))
}
