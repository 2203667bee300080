use std::path::PathBuf;

use clap::Args;
use infoflow::powermodels::{discretize, load_cluster_model, ClusterModel};
use infoflow::sysmodel::DEFAULT_STEADY_TOL;

use crate::output::{csv_writer, num};
use crate::{CliError, Globals};

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// System matrix CSV (optional header of state names).
    #[arg(long)]
    matrix: PathBuf,
    /// Clusters file: lines `name: member,member,...`.
    #[arg(long)]
    clusters: PathBuf,
    /// Only rank transfers into this cluster.
    #[arg(long)]
    target: Option<String>,
    /// Rank the individual states of this cluster by their transfer into
    /// --target.
    #[arg(long, requires = "target")]
    zoom: Option<String>,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Treat the matrix as continuous-time and discretize with this step.
    #[arg(long)]
    continuous_dt: Option<f64>,
}

pub fn run(args: &ClusterArgs, g: &Globals) -> Result<(), CliError> {
    let mut model = load_cluster_model(&args.matrix, &args.clusters)?;
    if let Some(dt) = args.continuous_dt {
        let a = discretize(model.a_matrix(), dt)?;
        model = ClusterModel::new(a, model.state_names().to_vec(), model.clusters().to_vec())?;
    }
    let ranked = match (&args.zoom, &args.target) {
        (Some(cluster), Some(target)) => model.zoom(cluster, target, args.sigma, DEFAULT_STEADY_TOL)?,
        (None, target) => model.rank_clusters(target.as_deref(), args.sigma, DEFAULT_STEADY_TOL)?,
        (Some(_), None) => unreachable!("clap requires --target with --zoom"),
    };
    let mut w = csv_writer(g.output.as_deref())?;
    w.write_record(["rank", "source", "target", "transfer"])?;
    for (i, r) in ranked.iter().enumerate() {
        w.write_record([(i + 1).to_string(), r.source.clone(), r.target.clone(), num(r.value)])?;
    }
    w.flush()?;
    Ok(())
}
