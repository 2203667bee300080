//! Nonlinear 3-bus power model and the tools around it: simulation,
//! equilibria, linearization and discretization, continuation sweeps with
//! bifurcation detection, participation factors, cluster models for
//! user-supplied linear systems, and data-driven transfer studies.

mod cluster;
mod participation;
mod simulate;
pub mod study;
mod sweep;
mod three_bus;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use cluster::{load_cluster_model, parse_clusters, Cluster, ClusterModel, RankedTransfer};
pub use participation::{participation_factors, Participation};
pub use simulate::{simulate, simulate_with, SimulationConfig};
pub use sweep::{
    refine_turning_point, sweep_operating_points, sweep_with, Bifurcation, BifurcationKind,
    OperatingPoint, SweepConfig, SweepPoint, SweepReport,
};
pub use three_bus::{
    find_equilibrium, linearize, three_bus_rhs, ThreeBusModel, ThreeBusState, DEFAULT_GUESS,
    STATE_NAMES,
};

/// Load reactive power in MVAR corresponding to one unit of `q1` in the
/// model equations (100 MVA base).
pub const MVAR_PER_UNIT: f64 = 100.0;

/// Default sampling interval for discretization and simulation.
pub const DEFAULT_DT: f64 = 0.01;

/// One-step map `exp(A·dt)` of a continuous-time linear system.
pub fn discretize(a_continuous: &DMatrix<f64>, dt: f64) -> Result<DMatrix<f64>> {
    if !a_continuous.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            a_continuous.nrows(),
            a_continuous.ncols()
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if a_continuous.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    Ok((a_continuous * dt).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, DVector};

    #[test]
    fn exponential_examples() {
        assert_eq!(discretize(&DMatrix::zeros(3, 3), 0.1).unwrap(), DMatrix::identity(3, 3));
        let d = discretize(&DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 2.0])), 0.3).unwrap();
        assert_abs_diff_eq!(d, DMatrix::from_diagonal(&DVector::from_vec(vec![(-0.3f64).exp(), 0.6f64.exp()])), epsilon = 1e-14);
        assert!(discretize(&dmatrix![1.0], 0.0).is_err());
    }

    #[test]
    fn first_order_error_is_quadratic() {
        let a = dmatrix![-0.5, 1.2; -0.7, -0.1];
        let err = |dt: f64| (discretize(&a, dt).unwrap() - (DMatrix::identity(2, 2) + &a * dt)).norm();
        let ratio = err(0.01) / err(0.005);
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
    }
}
