//! Linear probing: freeze the encoder, train a softmax-regression classifier
//! on its features, and report top-1 accuracy on a held-out split.

use anyhow::{bail, Context};
use jcl_core::checkpoint::Checkpoint;
use jcl_core::data::generate_dataset;
use jcl_core::encoder::FeatureTap;
use jcl_core::numerics::Rng;
use jcl_core::trainer::streams;

use crate::report::{fmt_f64, CsvTable};

/// Probe hyperparameters are fixed: the probe is a measurement instrument,
/// not a tunable model.
pub const TRAIN_FRACTION: f64 = 0.8;
pub const PROBE_EPOCHS: usize = 300;
pub const PROBE_LR: f64 = 1.0;
const STD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct ProbeReport {
    pub seed: u64,
    pub accuracy: f64,
    pub train_size: usize,
    pub test_size: usize,
    pub classes: usize,
}

impl ProbeReport {
    pub fn to_table(&self) -> CsvTable {
        let mut table = CsvTable::new(vec![
            "seed",
            "top1_accuracy",
            "train_size",
            "test_size",
            "classes",
        ]);
        table.push_row(vec![
            self.seed.to_string(),
            fmt_f64(self.accuracy),
            self.train_size.to_string(),
            self.test_size.to_string(),
            self.classes.to_string(),
        ]);
        table
    }
}

/// Full-batch softmax regression on fixed features. Deterministic given the
/// split; the convex objective needs no random initialization.
pub fn probe_features(
    features: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    seed: u64,
) -> anyhow::Result<ProbeReport> {
    if features.len() != labels.len() {
        bail!("feature/label count mismatch");
    }
    if features.len() < 2 {
        bail!("probe needs at least two examples");
    }
    if classes < 2 {
        bail!("probe needs at least two classes");
    }
    let feature_dim = features[0].len();
    if features.iter().any(|f| f.len() != feature_dim) {
        bail!("inconsistent feature dimensions");
    }

    let mut rng = Rng::for_stream(seed, streams::PROBE);
    let mut order: Vec<usize> = (0..features.len()).collect();
    rng.shuffle(&mut order);
    let train_size = ((features.len() as f64 * TRAIN_FRACTION) as usize)
        .clamp(1, features.len() - 1);
    let (train_idx, test_idx) = order.split_at(train_size);

    // Standardize with training-split statistics for conditioning.
    let mut mean = vec![0.0; feature_dim];
    for &i in train_idx {
        for (m, v) in mean.iter_mut().zip(&features[i]) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= train_idx.len() as f64;
    }
    let mut std = vec![0.0; feature_dim];
    for &i in train_idx {
        for (s, (v, m)) in std.iter_mut().zip(features[i].iter().zip(&mean)) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut std {
        *s = (*s / train_idx.len() as f64).sqrt().max(STD_FLOOR);
    }
    let standardize = |f: &[f64]| -> Vec<f64> {
        f.iter()
            .zip(mean.iter().zip(&std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    };
    let train: Vec<(Vec<f64>, usize)> = train_idx
        .iter()
        .map(|&i| (standardize(&features[i]), labels[i]))
        .collect();
    let test: Vec<(Vec<f64>, usize)> = test_idx
        .iter()
        .map(|&i| (standardize(&features[i]), labels[i]))
        .collect();

    // W: classes × dim, b: classes; full-batch gradient descent.
    let mut weights = vec![0.0; classes * feature_dim];
    let mut bias = vec![0.0; classes];
    let n = train.len() as f64;
    for _ in 0..PROBE_EPOCHS {
        let mut w_grad = vec![0.0; classes * feature_dim];
        let mut b_grad = vec![0.0; classes];
        for (x, y) in &train {
            let probs = class_probabilities(&weights, &bias, x, classes);
            for c in 0..classes {
                let err = probs[c] - if c == *y { 1.0 } else { 0.0 };
                b_grad[c] += err;
                let row = &mut w_grad[c * feature_dim..(c + 1) * feature_dim];
                for (g, v) in row.iter_mut().zip(x) {
                    *g += err * v;
                }
            }
        }
        for (w, g) in weights.iter_mut().zip(&w_grad) {
            *w -= PROBE_LR * g / n;
        }
        for (b, g) in bias.iter_mut().zip(&b_grad) {
            *b -= PROBE_LR * g / n;
        }
    }

    let mut correct = 0usize;
    for (x, y) in &test {
        if predict(&weights, &bias, x, classes) == *y {
            correct += 1;
        }
    }
    Ok(ProbeReport {
        seed,
        accuracy: correct as f64 / test.len() as f64,
        train_size: train.len(),
        test_size: test.len(),
        classes,
    })
}

fn class_probabilities(weights: &[f64], bias: &[f64], x: &[f64], classes: usize) -> Vec<f64> {
    let dim = x.len();
    let mut logits = vec![0.0; classes];
    for c in 0..classes {
        let row = &weights[c * dim..(c + 1) * dim];
        let mut acc = bias[c];
        for i in 0..dim {
            acc += row[i] * x[i];
        }
        logits[c] = acc;
    }
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &l| m.max(l));
    let mut sum = 0.0;
    for l in &mut logits {
        *l = (*l - max).exp();
        sum += *l;
    }
    for l in &mut logits {
        *l /= sum;
    }
    logits
}

fn predict(weights: &[f64], bias: &[f64], x: &[f64], classes: usize) -> usize {
    class_probabilities(weights, bias, x, classes)
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite probabilities"))
        .map(|(i, _)| i)
        .expect("at least one class")
}

/// Probes a trained checkpoint: regenerates the run's dataset, extracts
/// frozen pre-projection features of every base point, and fits the linear
/// classifier on the latent cluster labels.
pub fn probe_checkpoint(
    checkpoint: &Checkpoint,
    seed: u64,
    tap: FeatureTap,
) -> anyhow::Result<ProbeReport> {
    let config = &checkpoint.config;
    let mut data_rng = Rng::for_stream(config.seed, streams::DATASET);
    let dataset = generate_dataset(&config.dataset_shape(), &mut data_rng);
    let mut features = Vec::with_capacity(dataset.len());
    let mut labels = Vec::with_capacity(dataset.len());
    for inst in &dataset {
        let f = checkpoint
            .query_encoder
            .feature(&inst.base, tap)
            .context("extracting frozen features")?;
        features.push(f);
        labels.push(inst.cluster);
    }
    probe_features(&features, &labels, config.cluster_count, seed)
}
