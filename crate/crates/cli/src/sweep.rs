//! Hyperparameter sweeps: vary one of M′ / λ / τ, train and probe per value,
//! and emit one CSV row per run. Individual failures mark their row and the
//! sweep continues.

use std::path::Path;

use jcl_core::checkpoint::Checkpoint;
use jcl_core::encoder::FeatureTap;
use jcl_core::trainer::{Method, TrainConfig};

use crate::probe::probe_checkpoint;
use crate::report::{fmt_f64, CsvTable};
use crate::runner::run_training;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    MPrime,
    Lambda,
    Tau,
}

impl SweepParam {
    pub fn parse(s: &str) -> anyhow::Result<Self> {
        match s {
            "mprime" => Ok(SweepParam::MPrime),
            "lambda" => Ok(SweepParam::Lambda),
            "tau" => Ok(SweepParam::Tau),
            other => anyhow::bail!("unknown sweep parameter '{other}' (expected mprime|lambda|tau)"),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParam::MPrime => "mprime",
            SweepParam::Lambda => "lambda",
            SweepParam::Tau => "tau",
        }
    }

    pub fn apply(&self, config: &mut TrainConfig, value: f64) -> anyhow::Result<()> {
        match self {
            SweepParam::MPrime => {
                if value < 1.0 || value.fract() != 0.0 {
                    anyhow::bail!("mprime values must be positive integers, got {value}");
                }
                config.positive_keys = value as usize;
            }
            SweepParam::Lambda => config.lambda = value,
            SweepParam::Tau => config.tau = value,
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub probe_accuracy: Option<f64>,
    pub final_loss: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn to_table(&self) -> CsvTable {
        let mut table = CsvTable::new(vec![
            "param",
            "value",
            "probe_accuracy",
            "final_loss",
            "status",
        ]);
        for row in &self.rows {
            table.push_row(vec![
                self.param.as_str().to_string(),
                fmt_f64(row.value),
                row.probe_accuracy.map(fmt_f64).unwrap_or_default(),
                row.final_loss.map(fmt_f64).unwrap_or_default(),
                row.status.clone(),
            ]);
        }
        table
    }
}

/// One train + probe per value; all other hyperparameters stay at the base
/// spec. Run artifacts land in `run_<param>_<index>` subdirectories.
pub fn run_sweep(
    base: &TrainConfig,
    method: Method,
    param: SweepParam,
    values: &[f64],
    out_dir: &Path,
) -> anyhow::Result<SweepReport> {
    anyhow::ensure!(!values.is_empty(), "sweep needs at least one value");
    std::fs::create_dir_all(out_dir)?;
    let mut rows = Vec::with_capacity(values.len());
    for (idx, &value) in values.iter().enumerate() {
        let run_dir = out_dir.join(format!("run_{}_{idx}", param.as_str()));
        let row = match sweep_one(base, method, param, value, &run_dir) {
            Ok((accuracy, final_loss)) => SweepRow {
                value,
                probe_accuracy: Some(accuracy),
                final_loss: Some(final_loss),
                status: "ok".into(),
            },
            Err(err) => {
                log::warn!("sweep value {value} failed: {err:#}");
                SweepRow {
                    value,
                    probe_accuracy: None,
                    final_loss: None,
                    status: format!("failed: {err}"),
                }
            }
        };
        rows.push(row);
    }
    Ok(SweepReport { param, rows })
}

fn sweep_one(
    base: &TrainConfig,
    method: Method,
    param: SweepParam,
    value: f64,
    run_dir: &Path,
) -> anyhow::Result<(f64, f64)> {
    let mut config = base.clone();
    param.apply(&mut config, value)?;
    config.validate()?;
    let artifacts = run_training(&config, method, run_dir)?;
    let checkpoint = Checkpoint::load(&artifacts.checkpoint_path)?;
    let probe = probe_checkpoint(&checkpoint, config.seed, FeatureTap::Backbone)?;
    Ok((probe.accuracy, artifacts.final_mean_loss))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_rejects_unknown_parameter() {
        assert!(SweepParam::parse("gamma").is_err());
        assert_eq!(SweepParam::parse("lambda").unwrap(), SweepParam::Lambda);
    }

    #[test]
    fn mprime_values_must_be_integers() {
        let mut cfg = TrainConfig::default();
        assert!(SweepParam::MPrime.apply(&mut cfg, 2.5).is_err());
        assert!(SweepParam::MPrime.apply(&mut cfg, 0.0).is_err());
        SweepParam::MPrime.apply(&mut cfg, 3.0).unwrap();
        assert_eq!(cfg.positive_keys, 3);
    }

    #[test]
    fn failed_rows_keep_the_sweep_going() {
        let base = TrainConfig {
            batch_size: 4,
            queue_capacity: 8,
            embedding_dim: 4,
            hidden_dim: 6,
            epochs: 1,
            instance_count: 8,
            ambient_dim: 6,
            cluster_count: 2,
            seed: 1,
            ..TrainConfig::default()
        };
        let dir = tempfile::tempdir().unwrap();
        // τ = -1 fails validation inside its run; τ = 0.2 succeeds.
        let report = run_sweep(
            &base,
            Method::Infonce,
            SweepParam::Tau,
            &[-1.0, 0.2],
            dir.path(),
        )
        .unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.rows[0].status.starts_with("failed"));
        assert_eq!(report.rows[1].status, "ok");
        assert!(report.rows[1].probe_accuracy.is_some());
    }
}
