use std::path::PathBuf;

use clap::{ArgGroup, Args};
use infoflow::io::read_labeled_matrix_csv;
use infoflow::powermodels::{participation_factors, OperatingPoint, DEFAULT_GUESS, STATE_NAMES};

use crate::output::{complex, csv_writer, num};
use crate::{CliError, Globals, ModelArgs};

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("system").required(true).args(["q1", "matrix"])))]
pub struct ParticipationArgs {
    /// 3-bus operating point (MVAR, see --q1-scale); uses its Jacobian.
    #[arg(long)]
    q1: Option<f64>,
    /// Matrix CSV (optional header of state names).
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Rank modes by modulus (discrete-time matrix) instead of real part.
    #[arg(long)]
    discrete: bool,
    #[command(flatten)]
    model: ModelArgs,
}

pub fn run(args: &ParticipationArgs, g: &Globals) -> Result<(), CliError> {
    let (a, names) = match (&args.q1, &args.matrix) {
        (Some(q1), None) => {
            let op = OperatingPoint::new(&args.model.model(), args.model.to_native(*q1)?, &DEFAULT_GUESS)?;
            (op.jacobian, STATE_NAMES.map(String::from).to_vec())
        }
        (None, Some(path)) => {
            let table = read_labeled_matrix_csv(path)?;
            let n = table.values.nrows();
            let names = table.names.unwrap_or_else(|| (0..n).map(|i| format!("z{i}")).collect());
            (table.values, names)
        }
        _ => unreachable!("clap enforces exactly one system"),
    };
    let p = participation_factors(&a)?;
    let k = if args.discrete { p.most_unstable_discrete_mode() } else { p.most_unstable_mode() };
    eprintln!("most unstable mode: {} (eigenvalue {})", k, complex(&p.eigenvalues[k]));

    let n = a.nrows();
    let mut w = csv_writer(g.output.as_deref())?;
    let mut header = vec!["state".to_string(), "most_unstable".to_string()];
    header.extend((0..n).map(|i| format!("mode_{i}")));
    w.write_record(&header)?;
    let row = |label: &str, first: String, rest: Vec<String>| {
        let mut r = vec![label.to_string(), first];
        r.extend(rest);
        r
    };
    for (s, name) in names.iter().enumerate() {
        let cells = (0..n).map(|i| num(p.factors[(s, i)])).collect();
        w.write_record(row(name, num(p.factors[(s, k)]), cells))?;
    }
    let sums: Vec<f64> = (0..n).map(|i| p.factors.column(i).sum()).collect();
    w.write_record(row("sum", num(sums[k]), sums.iter().map(|&v| num(v)).collect()))?;
    w.write_record(row(
        "eigenvalue",
        complex(&p.eigenvalues[k]),
        p.eigenvalues.iter().map(complex).collect(),
    ))?;
    w.flush()?;
    Ok(())
}
