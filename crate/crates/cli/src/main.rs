//! `jcl` experiment front end: verify the loss bound, train encoders,
//! probe frozen features, sweep hyperparameters, and analyze feature
//! distributions. Set JCL_LOG (error|warn|info|debug) for verbosity.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use jcl_core::checkpoint::Checkpoint;
use jcl_core::encoder::FeatureTap;
use jcl_core::trainer::Method;

use jcl_cli::analyze::analyze_checkpoint;
use jcl_cli::probe::probe_checkpoint;
use jcl_cli::report::CsvTable;
use jcl_cli::runner::run_training;
use jcl_cli::specfile::{load_spec, write_resolved_spec};
use jcl_cli::sweep::{run_sweep, SweepParam};
use jcl_cli::verify::run_verification;

#[derive(Parser)]
#[command(name = "jcl", version, about = "Joint contrastive learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Jensen-bound, tightness, reduction, and gradient property
    /// suites over randomized instances.
    VerifyBound(VerifyArgs),
    /// Train an encoder from a spec file.
    Train(TrainArgs),
    /// Train a linear classifier on frozen checkpoint features.
    Probe(ProbeArgs),
    /// Train + probe across a grid of one hyperparameter.
    Sweep(SweepArgs),
    /// Histogram intra-instance feature similarities and variances.
    AnalyzeFeatures(AnalyzeArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// Randomized instances per suite.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte-Carlo draws per Jensen-bound trial.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Directory for verify_report.csv (stdout only when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// TOML spec file; keys mirror the training configuration.
    #[arg(long)]
    spec: PathBuf,
    /// Loss driving the run: jcl | infonce | vanilla.
    #[arg(long, default_value = "jcl")]
    method: String,
    /// Output directory for spec copy, checkpoint, and log.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Feature hook: backbone (pre-projection, default) | projection.
    #[arg(long, default_value = "backbone")]
    tap: String,
    /// Directory for probe_report.csv (stdout only when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Which hyperparameter to vary: mprime | lambda | tau.
    #[arg(long)]
    param: String,
    /// Comma-separated values, e.g. 0,0.2,4.0,100.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    values: Vec<f64>,
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value = "jcl")]
    method: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 4096)]
    instances: usize,
    #[arg(long, default_value_t = 32)]
    augmentations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Feature hook: backbone (pre-projection, default) | projection.
    #[arg(long, default_value = "backbone")]
    tap: String,
    /// Directory for histogram CSVs (stdout summary only when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_tap(s: &str) -> anyhow::Result<FeatureTap> {
    match s {
        "backbone" => Ok(FeatureTap::Backbone),
        "projection" => Ok(FeatureTap::Projection),
        other => anyhow::bail!("unknown tap '{other}' (expected backbone|projection)"),
    }
}

fn emit(table: &CsvTable, out: Option<&PathBuf>, filename: &str) -> anyhow::Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            table.write(&dir.join(filename))?;
        }
        None => print!("{}", table.to_csv()),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("JCL_LOG", "info"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::VerifyBound(args) => {
            anyhow::ensure!(args.trials >= 1, "trials must be >= 1");
            let report = run_verification(args.trials, args.seed, args.samples);
            emit(&report.to_table(), args.out.as_ref(), "verify_report.csv")?;
            for s in &report.suites {
                log::info!(
                    "{}: {}/{} passed (worst margin {:+.3e})",
                    s.name,
                    s.passes,
                    s.trials,
                    s.worst_margin
                );
            }
            if report.all_passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                log::error!("verification failed");
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Train(args) => {
            let config = load_spec(&args.spec)?;
            let method = Method::parse(&args.method)?;
            let artifacts = run_training(&config, method, &args.out)?;
            log::info!("artifacts in {}", artifacts.out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Probe(args) => {
            let checkpoint = Checkpoint::load(&args.checkpoint).context("loading checkpoint")?;
            let tap = parse_tap(&args.tap)?;
            let report = probe_checkpoint(&checkpoint, args.seed, tap)?;
            if let Some(dir) = &args.out {
                std::fs::create_dir_all(dir)?;
                write_resolved_spec(&checkpoint.config, &dir.join("spec.toml"))?;
            }
            emit(&report.to_table(), args.out.as_ref(), "probe_report.csv")?;
            log::info!("top-1 accuracy {:.4}", report.accuracy);
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep(args) => {
            let base = load_spec(&args.spec)?;
            let method = Method::parse(&args.method)?;
            let param = SweepParam::parse(&args.param)?;
            let report = run_sweep(&base, method, param, &args.values, &args.out)?;
            write_resolved_spec(&base, &args.out.join("spec.toml"))?;
            report.to_table().write(&args.out.join("sweep.csv"))?;
            let failed = report.rows.iter().filter(|r| r.status != "ok").count();
            log::info!(
                "sweep finished: {} runs, {failed} failed",
                report.rows.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::AnalyzeFeatures(args) => {
            let checkpoint = Checkpoint::load(&args.checkpoint).context("loading checkpoint")?;
            let tap = parse_tap(&args.tap)?;
            let report = analyze_checkpoint(
                &checkpoint,
                args.instances,
                args.augmentations,
                args.seed,
                tap,
            )?;
            if let Some(dir) = &args.out {
                std::fs::create_dir_all(dir)?;
                write_resolved_spec(&checkpoint.config, &dir.join("spec.toml"))?;
                report
                    .similarity
                    .to_table()
                    .write(&dir.join("similarity_hist.csv"))?;
                report
                    .variance
                    .to_table()
                    .write(&dir.join("variance_hist.csv"))?;
            }
            emit(&report.summary_table(), args.out.as_ref(), "analysis_summary.csv")?;
            log::info!(
                "similarity mean {:.4}, variance mean {:.6}",
                report.similarity.mean,
                report.variance.mean
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
