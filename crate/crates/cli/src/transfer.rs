use std::path::PathBuf;

use clap::{ArgGroup, Args, ValueEnum};
use infoflow::estimation::{data_driven_transfer, EstimationConfig, Regularization};
use infoflow::infotransfer::{steady_state_transfer, transfer_one_step};
use infoflow::io::{read_labeled_matrix_csv, read_snapshot_csv};
use infoflow::sysmodel::{propagate_covariance, CovarianceState, LinearSystem, Partition, DEFAULT_STEADY_TOL};

use crate::output::{csv_writer, group_label, num, resolve_states};
use crate::{CliError, Globals};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitialCovariance {
    Identity,
    Zero,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("input").required(true).args(["data", "model"])))]
pub struct TransferArgs {
    /// Snapshot CSV (rows are samples; optional header of state names).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Known one-step matrix CSV; computes the model-based transfer instead.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Source states (indices or names, comma separated).
    #[arg(long)]
    from: String,
    /// Target states (indices or names, comma separated).
    #[arg(long)]
    to: String,
    /// Regularization weight of the estimate.
    #[arg(long, default_value_t = 0.05)]
    lambda: f64,
    /// Process-noise bound (three standard deviations); default: three
    /// times the residual standard deviation.
    #[arg(long)]
    noise_bound: Option<f64>,
    /// Use unsquared norms in the regularized objective.
    #[arg(long)]
    unsquared: bool,
    /// Noise standard deviation for --model.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Steps of the covariance recursion reported before the steady state.
    #[arg(long, default_value_t = 20)]
    horizon: usize,
    /// Initial covariance of the recursion.
    #[arg(long, value_enum, default_value_t = InitialCovariance::Identity)]
    sigma0: InitialCovariance,
    /// Report absolute values of the transfers.
    #[arg(long)]
    abs: bool,
}

pub fn run(args: &TransferArgs, g: &Globals) -> Result<(), CliError> {
    let (values, steady, header) = match (&args.data, &args.model) {
        (Some(path), None) => from_data(args, path)?,
        (None, Some(path)) => from_model(args, path)?,
        _ => unreachable!("clap enforces exactly one input"),
    };
    let shown = |v: f64| num(if args.abs { v.abs() } else { v });
    let mut w = csv_writer(g.output.as_deref())?;
    w.write_record(["step", header.as_str()])?;
    for (t, v) in values.iter().enumerate() {
        w.write_record([t.to_string(), shown(*v)])?;
    }
    w.write_record(["steady_state".to_string(), shown(steady)])?;
    w.flush()?;
    Ok(())
}

fn initial(choice: InitialCovariance, n: usize) -> CovarianceState {
    match choice {
        InitialCovariance::Identity => CovarianceState::identity(n),
        InitialCovariance::Zero => CovarianceState::zeros(n),
    }
}

fn partition(args: &TransferArgs, names: Option<&[String]>, n: usize) -> Result<(Partition, String), CliError> {
    let source = resolve_states(&args.from, names, n)?;
    let target = resolve_states(&args.to, names, n)?;
    let part = Partition::from_source_target(&source, &target, n)?;
    let header = format!("transfer_{}_to_{}", group_label(&source, names), group_label(&target, names));
    Ok((part, header))
}

type Outcome = (Vec<f64>, f64, String);

fn from_data(args: &TransferArgs, path: &PathBuf) -> Result<Outcome, CliError> {
    let data = read_snapshot_csv(path)?;
    let (part, header) = partition(args, data.names(), data.dim())?;
    let config = EstimationConfig {
        lambda: args.lambda,
        noise_bound: args.noise_bound,
        regularization: if args.unsquared { Regularization::Unsquared } else { Regularization::Ridge },
    };
    let result = data_driven_transfer(&data, &part, &config, &initial(args.sigma0, data.dim()), Some(args.horizon))?;
    eprintln!(
        "estimate: spectral radius {}, noise scale {}",
        num(result.spectral_radius),
        num(result.noise_scale)
    );
    let steady = result.steady_state.ok_or_else(|| infoflow::Error::NoConvergence {
        what: format!(
            "steady-state transfer (estimated map has spectral radius {} >= 1)",
            num(result.spectral_radius)
        ),
        iterations: args.horizon,
    })?;
    Ok((result.series.values().to_vec(), steady, header))
}

fn from_model(args: &TransferArgs, path: &PathBuf) -> Result<Outcome, CliError> {
    let table = read_labeled_matrix_csv(path)?;
    let n = table.values.nrows();
    let (part, header) = partition(args, table.names.as_deref(), n)?;
    let sys = LinearSystem::new(table.values, args.sigma)?;
    let mut sigma = initial(args.sigma0, n);
    let mut values = Vec::with_capacity(args.horizon);
    for t in 0..args.horizon {
        if t > 0 {
            sigma = propagate_covariance(&sys, &sigma, 1)?;
        }
        values.push(transfer_one_step(&sys, &part, &sigma)?);
    }
    let steady = steady_state_transfer(&sys, &part, DEFAULT_STEADY_TOL)?;
    Ok((values, steady, header))
}
