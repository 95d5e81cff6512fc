//! Training-run orchestration: provenance, artifacts, and abort diagnostics.
//!
//! Every run directory contains the fully-resolved spec, the checkpoint, and
//! the per-epoch CSV log, so a run is reproducible from its artifacts alone.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use jcl_core::checkpoint::Checkpoint;
use jcl_core::trainer::{Method, TrainConfig, Trainer};

use crate::report::{fmt_f64, CsvTable};
use crate::specfile::write_resolved_spec;

#[derive(Debug, Clone)]
pub struct TrainArtifacts {
    pub out_dir: PathBuf,
    pub spec_path: PathBuf,
    pub checkpoint_path: PathBuf,
    pub log_path: PathBuf,
    pub final_mean_loss: f64,
}

pub fn train_log_table(log: &jcl_core::trainer::TrainLog) -> CsvTable {
    let mut table = CsvTable::new(vec!["epoch", "mean_loss", "lr", "grad_norm", "wall_time_s"]);
    for e in &log.epochs {
        table.push_row(vec![
            e.epoch.to_string(),
            fmt_f64(e.mean_loss),
            fmt_f64(e.lr),
            fmt_f64(e.grad_norm),
            fmt_f64(e.wall_time_s),
        ]);
    }
    table
}

/// Runs a full training job into `out_dir`. On a training abort the
/// diagnostic record lands in `diagnostic.txt` before the error propagates.
pub fn run_training(
    config: &TrainConfig,
    method: Method,
    out_dir: &Path,
) -> anyhow::Result<TrainArtifacts> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let spec_path = out_dir.join("spec.toml");
    write_resolved_spec(config, &spec_path)?;

    let mut trainer = Trainer::new(config, method)?;
    log::info!(
        "training method={} epochs={} instances={} seed={}",
        method.as_str(),
        config.epochs,
        config.instance_count,
        config.seed
    );
    if let Err(err) = trainer.run_to_completion() {
        let diagnostic = out_dir.join("diagnostic.txt");
        let _ = fs::write(&diagnostic, format!("{err}\n"));
        return Err(anyhow::Error::from(err))
            .with_context(|| format!("diagnostic record at {}", diagnostic.display()));
    }

    let checkpoint_path = out_dir.join("checkpoint.json");
    Checkpoint::from_trainer(&trainer)
        .save(&checkpoint_path)
        .context("writing checkpoint")?;
    let log_path = out_dir.join("train_log.csv");
    train_log_table(trainer.log()).write(&log_path)?;

    let final_mean_loss = trainer
        .log()
        .epochs
        .last()
        .map(|e| e.mean_loss)
        .unwrap_or(f64::NAN);
    log::info!("finished: final epoch mean loss {final_mean_loss:.6}");
    Ok(TrainArtifacts {
        out_dir: out_dir.to_path_buf(),
        spec_path,
        checkpoint_path,
        log_path,
        final_mean_loss,
    })
}
