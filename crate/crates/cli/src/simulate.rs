use std::io::Write as _;

use clap::Args;
use infoflow::io::write_snapshot_csv;
use infoflow::powermodels::{simulate_with, OperatingPoint, SimulationConfig, ThreeBusState, DEFAULT_GUESS};

use crate::output::{complex, num, sink};
use crate::{CliError, Globals, ModelArgs};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Load reactive power (MVAR, see --q1-scale).
    #[arg(long, default_value_t = 100.0)]
    q1: f64,
    /// Number of recorded samples, at least 2 (the first is the start state).
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(2..))]
    steps: u64,
    /// Sampling interval.
    #[arg(long, default_value_t = infoflow::powermodels::DEFAULT_DT)]
    dt: f64,
    /// Longest integration step within a sampling interval.
    #[arg(long, default_value_t = 0.002)]
    max_step: f64,
    /// Additive noise intensity.
    #[arg(long, default_value_t = 1e-4)]
    noise: f64,
    /// Offset added to every state of the equilibrium to start the run.
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    perturb: f64,
    #[command(flatten)]
    model: ModelArgs,
}

pub fn run(args: &SimulateArgs, g: &Globals) -> Result<(), CliError> {
    let model = args.model.model();
    let q1 = args.model.to_native(args.q1)?;
    let op = OperatingPoint::new(&model, q1, &DEFAULT_GUESS)?;
    let eq = op.equilibrium;
    eprintln!(
        "operating point q1 = {} ({} native): delta_g = {}, omega = {}, delta_l = {}, v = {}",
        num(args.q1),
        num(q1),
        num(eq.delta_g),
        num(eq.omega),
        num(eq.delta_l),
        num(eq.v)
    );
    let eigs: Vec<String> = op.eigenvalues.iter().map(complex).collect();
    eprintln!("eigenvalues: {} ({})", eigs.join(", "), if op.is_stable() { "stable" } else { "unstable" });

    let start = ThreeBusState::from_slice(&eq.to_array().map(|v| v + args.perturb));
    let config = SimulationConfig { dt: args.dt, max_step: args.max_step, noise_sigma: args.noise, seed: g.seed };
    let data = simulate_with(&model, &start, q1, args.steps as usize, &config).map_err(|e| match e {
        infoflow::Error::InvalidArgument(m) => CliError::Usage(m),
        e => e.into(),
    })?;
    let mut out = sink(g.output.as_deref())?;
    write_snapshot_csv(&mut out, &data)?;
    out.flush()?;
    Ok(())
}
