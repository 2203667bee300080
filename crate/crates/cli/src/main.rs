//! `infoflow`: simulate the 3-bus model, estimate information transfer from
//! snapshot data, sweep operating points, and rank cluster transfers.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage or input error.

mod cluster;
mod output;
mod participation;
mod simulate;
mod sweep;
mod transfer;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "infoflow", version, about = "Information transfer in linear and power-system models")]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for per-point work.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
    /// Output file (default: standard output).
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the 3-bus model around an operating point and write snapshots.
    Simulate(simulate::SimulateArgs),
    /// Transfer between state groups, from snapshots or from a known matrix.
    Transfer(transfer::TransferArgs),
    /// Continuation sweep with bifurcation detection and per-point transfers.
    Sweep(sweep::SweepArgs),
    /// Participation of each state in the most unstable mode.
    Participation(participation::ParticipationArgs),
    /// Ranked cluster-to-cluster transfers of a supplied linear system.
    Cluster(cluster::ClusterArgs),
}

/// Options shared by commands that evaluate the 3-bus model.
#[derive(Debug, Clone, Copy, Args)]
struct ModelArgs {
    /// Model units per unit of the load parameter (MVAR on a 100 MVA base).
    #[arg(long, default_value_t = infoflow::powermodels::MVAR_PER_UNIT)]
    q1_scale: f64,
    /// Sign of the linear voltage term in the load-angle equation.
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    load_voltage_sign: f64,
}

impl ModelArgs {
    fn model(&self) -> infoflow::powermodels::ThreeBusModel {
        infoflow::powermodels::ThreeBusModel { load_voltage_sign: self.load_voltage_sign }
    }

    fn to_native(&self, q1: f64) -> Result<f64, CliError> {
        if !(self.q1_scale > 0.0 && self.q1_scale.is_finite()) {
            return Err(CliError::Usage(format!("--q1-scale must be positive, got {}", self.q1_scale)));
        }
        Ok(q1 / self.q1_scale)
    }
}

/// Global settings handed to every command.
struct Globals {
    seed: u64,
    jobs: usize,
    output: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(infoflow::Error),
}

impl From<infoflow::Error> for CliError {
    fn from(e: infoflow::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Lib(std::io::Error::other(e).into())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(e) if e.is_numerical() => 1,
            _ => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let globals = Globals { seed: cli.seed, jobs: cli.jobs as usize, output: cli.output };
    let result = match &cli.command {
        Command::Simulate(a) => simulate::run(a, &globals),
        Command::Transfer(a) => transfer::run(a, &globals),
        Command::Sweep(a) => sweep::run(a, &globals),
        Command::Participation(a) => participation::run(a, &globals),
        Command::Cluster(a) => cluster::run(a, &globals),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
