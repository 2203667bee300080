use std::path::PathBuf;

use clap::Args;
use infoflow::estimation::EstimationConfig;
use infoflow::infotransfer::{instability_trend_with_threshold, TransferSeries, DEFAULT_TREND_THRESHOLD};
use infoflow::powermodels::study::{study_transfers, PointTransfers, StudyProtocol};
use infoflow::powermodels::{sweep_with, BifurcationKind, SweepConfig, SweepPoint, STATE_NAMES};

use crate::output::{csv_writer, num};
use crate::{CliError, Globals, ModelArgs};

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// First load value (MVAR, see --q1-scale).
    #[arg(long, default_value_t = 100.0)]
    start: f64,
    /// Last load value (MVAR).
    #[arg(long, default_value_t = 1094.6)]
    end: f64,
    /// Number of evenly spaced operating points.
    #[arg(long, default_value_t = 34, value_parser = clap::value_parser!(u64).range(2..))]
    points: u64,
    /// Skip the simulation and transfer estimation at each point.
    #[arg(long)]
    no_transfers: bool,
    /// Directory for one pairwise-transfer CSV per operating point.
    #[arg(long)]
    per_point_dir: Option<PathBuf>,
    /// Samples recorded per operating point.
    #[arg(long, default_value_t = 30)]
    samples: usize,
    /// Sampling interval of the recorded trajectories.
    #[arg(long, default_value_t = 0.5)]
    dt: f64,
    /// Longest integration step.
    #[arg(long, default_value_t = 0.002)]
    max_step: f64,
    /// Additive noise intensity.
    #[arg(long, default_value_t = 1e-4)]
    noise: f64,
    /// Offset added to every equilibrium state to start each run.
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    perturb: f64,
    /// Regularization weight of the estimates.
    #[arg(long, default_value_t = 0.05)]
    lambda: f64,
    /// Estimate from raw deviations instead of per-state standardized ones.
    #[arg(long)]
    no_standardize: bool,
    /// Points in the trailing trend window (default: all so far).
    #[arg(long)]
    trend_window: Option<usize>,
    /// Growth ratio above which the trend is flagged.
    #[arg(long, default_value_t = DEFAULT_TREND_THRESHOLD)]
    trend_threshold: f64,
    /// Report absolute values of the transfers (the trend is computed
    /// from the signed values either way).
    #[arg(long)]
    abs: bool,
    #[command(flatten)]
    model: ModelArgs,
}

fn kind_name(kind: BifurcationKind) -> &'static str {
    match kind {
        BifurcationKind::Hopf => "hopf",
        BifurcationKind::SaddleNode => "saddle_node",
    }
}

pub fn run(args: &SweepArgs, g: &Globals) -> Result<(), CliError> {
    let scale = args.model.q1_scale;
    let config = SweepConfig { model: args.model.model(), ..SweepConfig::default() };
    let report = sweep_with(
        &config,
        args.model.to_native(args.start)?,
        args.model.to_native(args.end)?,
        args.points as usize,
    )?;
    for b in &report.bifurcations {
        eprintln!(
            "{} in [{}, {}] MVAR ({}){}",
            kind_name(b.kind),
            num(b.lower * scale),
            num(b.upper * scale),
            if b.destabilizing { "destabilizing" } else { "restabilizing" },
            b.frequency.map_or(String::new(), |f| format!(", frequency {}", num(f)))
        );
    }

    let converged: Vec<_> = report.converged().cloned().collect();
    let transfers: Vec<Option<Result<PointTransfers, String>>> = if args.no_transfers {
        report.points.iter().map(|_| None).collect()
    } else {
        let protocol = StudyProtocol {
            samples: args.samples,
            dt: args.dt,
            max_step: args.max_step,
            noise_sigma: args.noise,
            initial_offset: args.perturb,
            standardize: !args.no_standardize,
            estimation: EstimationConfig::with_lambda(args.lambda),
        };
        let mut study = study_transfers(&config.model, &converged, &protocol, g.seed, g.jobs)?.into_iter();
        report
            .points
            .iter()
            .map(|p| p.point().map(|_| study.next().expect("one result per point").map_err(|e| e.to_string())))
            .collect()
    };

    if let Some(dir) = &args.per_point_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
        for (k, t) in transfers.iter().enumerate() {
            if let Some(Ok(t)) = t {
                write_pairwise(&dir.join(format!("point_{k:03}.csv")), t, args.abs)?;
            }
        }
    }

    // Rolling growth of the generator-to-load transfer over successful points.
    let shown = |v: f64| num(if args.abs { v.abs() } else { v });
    let mut history = Vec::new();
    let mut w = csv_writer(g.output.as_deref())?;
    let mut header: Vec<String> = vec!["q1".into()];
    header.extend(STATE_NAMES.iter().map(|s| s.to_string()));
    header.extend(["max_real_eigenvalue", "bifurcation", "status", "gen_to_load", "load_to_gen"].map(String::from));
    for i in 0..4 {
        for j in (0..4).filter(|&j| j != i) {
            header.push(format!("T_{}_to_{}", STATE_NAMES[i], STATE_NAMES[j]));
        }
    }
    header.extend(["gen_to_load_trend", "trend_flag"].map(String::from));
    w.write_record(&header)?;

    let mut failures = 0;
    for (k, point) in report.points.iter().enumerate() {
        let q1 = point.q1();
        let previous = if k == 0 { f64::NEG_INFINITY } else { report.points[k - 1].q1() };
        let flags: Vec<&str> = report
            .bifurcations
            .iter()
            .filter(|b| b.q1() > previous && b.q1() <= q1)
            .map(|b| kind_name(b.kind))
            .collect();
        let mut row = vec![num(q1 * scale)];
        match point {
            SweepPoint::Converged(op) => {
                row.extend(op.equilibrium.to_array().iter().map(|&v| num(v)));
                row.push(num(op.max_real_part()));
            }
            SweepPoint::Failed { .. } => row.extend(std::iter::repeat_n(String::new(), 5)),
        }
        row.push(flags.join(";"));
        let empty_transfers = || std::iter::repeat_n(String::new(), 16);
        match (point, &transfers[k]) {
            (SweepPoint::Failed { reason, .. }, _) => {
                failures += 1;
                row.push(format!("failed: {reason}"));
                row.extend(empty_transfers());
            }
            (_, None) => {
                row.push("ok".into());
                row.extend(empty_transfers());
            }
            (_, Some(Err(reason))) => {
                failures += 1;
                row.push(format!("transfer failed: {reason}"));
                row.extend(empty_transfers());
            }
            (_, Some(Ok(t))) => {
                row.push("ok".into());
                row.push(shown(t.generator_to_load));
                row.push(shown(t.load_to_generator));
                for i in 0..4 {
                    for j in (0..4).filter(|&j| j != i) {
                        row.push(shown(t.pairwise[(i, j)]));
                    }
                }
                history.push(t.generator_to_load);
                let window = args.trend_window.unwrap_or(history.len()).min(history.len());
                if window >= 2 {
                    let series = TransferSeries::new(history.clone(), vec![0.0; history.len()], "generator", "load")?;
                    let trend = instability_trend_with_threshold(&series, window, args.trend_threshold)?;
                    row.push(num(trend.ratio));
                    row.push(trend.flagged.to_string());
                } else {
                    row.extend([String::new(), String::new()]);
                }
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    if failures > 0 {
        eprintln!("{failures} of {} operating points failed (see status column)", report.points.len());
    }
    Ok(())
}

fn write_pairwise(path: &std::path::Path, t: &PointTransfers, abs: bool) -> Result<(), CliError> {
    let mut w = csv_writer(Some(path))?;
    let mut header = vec!["source".to_string()];
    header.extend(STATE_NAMES.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for (i, name) in STATE_NAMES.iter().enumerate() {
        let mut row = vec![name.to_string()];
        row.extend((0..4).map(|j| num(if abs { t.pairwise[(i, j)].abs() } else { t.pairwise[(i, j)] })));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
