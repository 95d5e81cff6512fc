//! Feature-distribution analysis: per-instance mean view-pair cosine
//! similarity and mean per-dimension feature variance, histogrammed over a
//! fresh sample of synthetic instances.

use anyhow::Context;
use jcl_core::checkpoint::Checkpoint;
use jcl_core::data::{augment, generate_dataset, DatasetShape};
use jcl_core::encoder::FeatureTap;
use jcl_core::numerics::{dot, l2_normalize, EmbeddingVec, Rng};
use jcl_core::stats::compute_covariance;
use jcl_core::trainer::streams;

use crate::report::{fmt_f64, CsvTable, HistogramReport};

pub const SIMILARITY_BINS: usize = 50;
pub const VARIANCE_BINS: usize = 50;

#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub seed: u64,
    pub instances: usize,
    pub augmentations: usize,
    pub similarity: HistogramReport,
    pub variance: HistogramReport,
}

impl AnalysisReport {
    pub fn summary_table(&self) -> CsvTable {
        let mut table = CsvTable::new(vec!["metric", "mean", "std", "count", "seed"]);
        table.push_row(vec![
            "similarity".to_string(),
            fmt_f64(self.similarity.mean),
            fmt_f64(self.similarity.std),
            self.similarity.count.to_string(),
            self.seed.to_string(),
        ]);
        table.push_row(vec![
            "variance".to_string(),
            fmt_f64(self.variance.mean),
            fmt_f64(self.variance.std),
            self.variance.count.to_string(),
            self.seed.to_string(),
        ]);
        table
    }
}

/// Runs the analysis against a checkpoint's query encoder.
///
/// Fresh instances are drawn from the run's data model under the analysis
/// seed. For every instance, all `augmentations` views are encoded, features
/// are ℓ2-normalized, and two sample points emerge: the mean over the full
/// ordered view-pair grid of cosine similarities (self-pairs included, so an
/// M-view instance contributes an M×M average), and the mean diagonal of the
/// biased view covariance.
pub fn analyze_checkpoint(
    checkpoint: &Checkpoint,
    instances: usize,
    augmentations: usize,
    seed: u64,
    tap: FeatureTap,
) -> anyhow::Result<AnalysisReport> {
    anyhow::ensure!(instances >= 1, "need at least one instance");
    anyhow::ensure!(augmentations >= 1, "need at least one augmentation");
    let config = &checkpoint.config;
    let shape = DatasetShape {
        instance_count: instances,
        ..config.dataset_shape()
    };
    let mut rng = Rng::for_stream(seed, streams::ANALYSIS);
    let sample = generate_dataset(&shape, &mut rng);

    let mut similarity_points = Vec::with_capacity(instances);
    let mut variance_points = Vec::with_capacity(instances);
    for inst in &sample {
        let views = augment(inst, augmentations, &mut rng);
        let mut feats: Vec<EmbeddingVec> = Vec::with_capacity(views.len());
        for view in &views {
            let raw = checkpoint
                .query_encoder
                .feature(view, tap)
                .context("feature extraction")?;
            let normalized = l2_normalize(&EmbeddingVec::new(raw)?)
                .context("normalizing feature vector")?;
            feats.push(normalized);
        }

        let m = feats.len();
        let mut acc = 0.0;
        for a in &feats {
            for b in &feats {
                acc += dot(a, b)?;
            }
        }
        similarity_points.push(acc / (m * m) as f64);

        let stats = compute_covariance(&feats)?;
        let dim = stats.covariance.dim();
        variance_points.push(stats.covariance.trace() / dim as f64);
    }

    Ok(AnalysisReport {
        seed,
        instances,
        augmentations,
        similarity: HistogramReport::build(&similarity_points, -1.0, 1.0, SIMILARITY_BINS),
        variance: HistogramReport::build(&variance_points, 0.0, 1.0, VARIANCE_BINS),
    })
}
