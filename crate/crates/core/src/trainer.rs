//! The end-to-end training loop: augment views, encode queries and keys,
//! compute per-instance key statistics, evaluate the contrastive loss
//! against the negative queue, update the query encoder by SGD and the key
//! encoder by momentum, then enqueue the batch key means.
//!
//! The reference path is single-threaded and bit-deterministic under a fixed
//! seed; randomness is split into named sub-streams so checkpointed state
//! can resume a run exactly.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{augment, generate_dataset, DatasetShape, SyntheticInstance};
use crate::encoder::{momentum_update, Activation, EncoderGrads, EncoderParams};
use crate::error::{Error, Result};
use crate::losses::{
    jcl_loss, pair_loss_with_grad, reduce_batch, vanilla_multi_key_loss_with_grad,
    ContrastiveInstance, LossParams, LossResult,
};
use crate::numerics::{EmbeddingVec, Rng};
use crate::optim::{cosine_lr, SgdOptimizer};
use crate::queue::NegativeQueue;
use crate::stats::{compute_covariance, compute_mean, stats_psd_check};

/// RNG sub-stream ids. Every stochastic stage draws from its own stream of
/// the run seed, so stages stay independent and individually restorable.
pub mod streams {
    pub const DATASET: u64 = 1;
    pub const INIT: u64 = 2;
    pub const QUEUE_PREFILL: u64 = 3;
    pub const TRAINING: u64 = 4;
    pub const PROBE: u64 = 5;
    pub const ANALYSIS: u64 = 6;
    pub const VERIFY: u64 = 7;
}

/// Which loss drives the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Closed-form infinite-key bound on per-instance key statistics.
    Jcl,
    /// Single positive key per instance, plain pair loss.
    Infonce,
    /// Finite multi-key average of pair losses.
    Vanilla,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Jcl => "jcl",
            Method::Infonce => "infonce",
            Method::Vanilla => "vanilla",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "jcl" => Ok(Method::Jcl),
            "infonce" => Ok(Method::Infonce),
            "vanilla" | "vanilla-multikey" => Ok(Method::Vanilla),
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

/// Every hyperparameter of a run. Field names double as the spec-file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub positive_keys: usize,
    pub lambda: f64,
    pub tau: f64,
    pub momentum: f64,
    pub queue_capacity: usize,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub sgd_momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    pub instance_count: usize,
    pub ambient_dim: usize,
    pub cluster_count: usize,
    pub cluster_spread: f64,
    pub augment_noise: f64,
    pub augment_gain: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            positive_keys: 5,
            lambda: 4.0,
            tau: 0.2,
            momentum: 0.999,
            queue_capacity: 1024,
            embedding_dim: 32,
            hidden_dim: 64,
            learning_rate: 0.06,
            sgd_momentum: 0.9,
            weight_decay: 1e-4,
            epochs: 100,
            seed: 0,
            instance_count: 1024,
            ambient_dim: 64,
            cluster_count: 10,
            cluster_spread: 0.5,
            augment_noise: 0.15,
            augment_gain: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.positive_keys == 0 {
            return Err(Error::InvalidConfig("positive_keys must be >= 1".into()));
        }
        if !self.tau.is_finite() || self.tau <= 0.0 {
            return Err(Error::InvalidConfig("tau must be positive".into()));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::InvalidConfig("lambda must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig("momentum must lie in [0, 1]".into()));
        }
        if self.queue_capacity < self.batch_size {
            return Err(Error::InvalidConfig(
                "queue_capacity must be at least batch_size".into(),
            ));
        }
        if self.embedding_dim == 0 || self.ambient_dim == 0 {
            return Err(Error::InvalidConfig("dimensions must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.instance_count == 0 {
            return Err(Error::InvalidConfig("instance_count must be >= 1".into()));
        }
        if self.cluster_count == 0 {
            return Err(Error::InvalidConfig("cluster_count must be >= 1".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidConfig("learning_rate must be nonnegative".into()));
        }
        let aug_ok = |v: f64| v.is_finite() && v >= 0.0;
        if !aug_ok(self.augment_noise) || !aug_ok(self.augment_gain) {
            return Err(Error::InvalidConfig("augmentation parameters must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn dataset_shape(&self) -> DatasetShape {
        DatasetShape {
            instance_count: self.instance_count,
            ambient_dim: self.ambient_dim,
            cluster_count: self.cluster_count,
            cluster_spread: self.cluster_spread,
            noise_scale: self.augment_noise,
            gain_jitter: self.augment_gain,
        }
    }

    fn encoder_dims(&self) -> Vec<usize> {
        if self.hidden_dim > 0 {
            vec![self.ambient_dim, self.hidden_dim, self.embedding_dim]
        } else {
            vec![self.ambient_dim, self.embedding_dim]
        }
    }

    fn steps_per_epoch(&self) -> usize {
        self.instance_count.div_ceil(self.batch_size)
    }

    fn total_steps(&self) -> usize {
        self.epochs * self.steps_per_epoch()
    }
}

/// One epoch of the training log. `wall_time_s` is the only field exempt
/// from the bit-determinism contract.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub lr: f64,
    pub grad_norm: f64,
    pub queue_len: usize,
    pub wall_time_s: f64,
    pub step_losses: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn step_losses(&self) -> Vec<f64> {
        self.epochs
            .iter()
            .flat_map(|e| e.step_losses.iter().copied())
            .collect()
    }
}

/// Holds the full mutable state of a run.
pub struct Trainer {
    config: TrainConfig,
    method: Method,
    dataset: Vec<SyntheticInstance>,
    query_encoder: EncoderParams,
    key_encoder: EncoderParams,
    optimizer: SgdOptimizer,
    queue: NegativeQueue,
    rng: Rng,
    epochs_done: usize,
    global_step: usize,
    log: TrainLog,
}

impl Trainer {
    pub fn new(config: &TrainConfig, method: Method) -> Result<Self> {
        config.validate()?;
        let mut data_rng = Rng::for_stream(config.seed, streams::DATASET);
        let dataset = generate_dataset(&config.dataset_shape(), &mut data_rng);

        let mut init_rng = Rng::for_stream(config.seed, streams::INIT);
        let query_encoder = EncoderParams::init(
            &config.encoder_dims(),
            Activation::Relu,
            true,
            &mut init_rng,
        )?;
        // MoCo convention: the key encoder starts as a copy of the query.
        let key_encoder = query_encoder.clone();

        // Pre-fill with encoded views of the dataset so the loss sees a full,
        // realistically-distributed negative set from step 0. Random unit
        // vectors would also fill the queue, but they make the first steps
        // artificially easy; the first-epoch loss then understates the
        // steady-state objective.
        let mut prefill_rng = Rng::for_stream(config.seed, streams::QUEUE_PREFILL);
        let mut queue = NegativeQueue::new(config.queue_capacity);
        for i in 0..config.queue_capacity {
            let inst = &dataset[i % dataset.len()];
            let view = augment(inst, 1, &mut prefill_rng);
            queue.push_batch(std::iter::once(key_encoder.encode(&view[0])?));
        }

        Ok(Self {
            config: config.clone(),
            method,
            dataset,
            query_encoder,
            key_encoder,
            optimizer: SgdOptimizer::new(config.sgd_momentum, config.weight_decay),
            queue,
            rng: Rng::for_stream(config.seed, streams::TRAINING),
            epochs_done: 0,
            global_step: 0,
            log: TrainLog::default(),
        })
    }

    /// Restores a trainer mid-run. The dataset is regenerated from the
    /// config's dedicated stream, so it matches the original bit-for-bit.
    #[allow(clippy::too_many_arguments)]
    pub fn restore(
        config: TrainConfig,
        method: Method,
        query_encoder: EncoderParams,
        key_encoder: EncoderParams,
        optimizer: SgdOptimizer,
        queue_entries: Vec<EmbeddingVec>,
        rng_state: &crate::numerics::RngState,
        epochs_done: usize,
        global_step: usize,
        log: TrainLog,
    ) -> Result<Self> {
        config.validate()?;
        let mut data_rng = Rng::for_stream(config.seed, streams::DATASET);
        let dataset = generate_dataset(&config.dataset_shape(), &mut data_rng);
        let queue = NegativeQueue::from_parts(config.queue_capacity, queue_entries);
        Ok(Self {
            config,
            method,
            dataset,
            query_encoder,
            key_encoder,
            optimizer,
            queue,
            rng: Rng::restore(rng_state),
            epochs_done,
            global_step,
            log,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn query_encoder(&self) -> &EncoderParams {
        &self.query_encoder
    }

    pub fn key_encoder(&self) -> &EncoderParams {
        &self.key_encoder
    }

    pub fn optimizer(&self) -> &SgdOptimizer {
        &self.optimizer
    }

    pub fn queue(&self) -> &NegativeQueue {
        &self.queue
    }

    pub fn rng_state(&self) -> crate::numerics::RngState {
        self.rng.state()
    }

    pub fn epochs_done(&self) -> usize {
        self.epochs_done
    }

    pub fn global_step(&self) -> usize {
        self.global_step
    }

    pub fn log(&self) -> &TrainLog {
        &self.log
    }

    pub fn dataset(&self) -> &[SyntheticInstance] {
        &self.dataset
    }

    pub fn is_finished(&self) -> bool {
        self.epochs_done >= self.config.epochs
    }

    /// Runs the remaining epochs.
    pub fn run_to_completion(&mut self) -> Result<()> {
        while !self.is_finished() {
            self.step_epoch()?;
        }
        Ok(())
    }

    /// One full pass over the dataset in a fresh shuffled order.
    pub fn step_epoch(&mut self) -> Result<EpochRecord> {
        let started = Instant::now();
        let epoch = self.epochs_done;
        let mut order: Vec<usize> = (0..self.dataset.len()).collect();
        self.rng.shuffle(&mut order);

        let params = LossParams::new(self.config.tau, self.config.lambda)?;
        let epoch_lr = cosine_lr(
            self.global_step,
            self.config.total_steps(),
            self.config.learning_rate,
        );
        let mut step_losses = Vec::new();
        let mut grad_norms = Vec::new();

        for (step_in_epoch, chunk) in order.chunks(self.config.batch_size).enumerate() {
            let lr = cosine_lr(
                self.global_step,
                self.config.total_steps(),
                self.config.learning_rate,
            );
            let (loss, grad_norm) = self
                .run_step(chunk, &params, lr)
                .map_err(|e| Error::TrainingAborted {
                    epoch,
                    step: step_in_epoch,
                    detail: format!("instances {:?}: {e}", chunk),
                })?;
            if !loss.is_finite() || !grad_norm.is_finite() {
                return Err(Error::TrainingAborted {
                    epoch,
                    step: step_in_epoch,
                    detail: format!("non-finite loss {loss} or gradient norm {grad_norm}"),
                });
            }
            step_losses.push(loss);
            grad_norms.push(grad_norm);
            self.global_step += 1;
        }

        let mean_loss = step_losses.iter().sum::<f64>() / step_losses.len() as f64;
        let grad_norm = grad_norms.iter().sum::<f64>() / grad_norms.len() as f64;
        let record = EpochRecord {
            epoch,
            mean_loss,
            lr: epoch_lr,
            grad_norm,
            queue_len: self.queue.len(),
            wall_time_s: started.elapsed().as_secs_f64(),
            step_losses,
        };
        self.log.epochs.push(record.clone());
        self.epochs_done += 1;
        Ok(record)
    }

    fn views_per_instance(&self) -> usize {
        match self.method {
            Method::Infonce => 2,
            Method::Jcl | Method::Vanilla => self.config.positive_keys + 1,
        }
    }

    fn run_step(&mut self, chunk: &[usize], params: &LossParams, lr: f64) -> Result<(f64, f64)> {
        let view_count = self.views_per_instance();
        let negatives = self.queue.to_vec();

        let mut passes = Vec::with_capacity(chunk.len());
        let mut results: Vec<LossResult> = Vec::with_capacity(chunk.len());
        let mut batch_means: Vec<EmbeddingVec> = Vec::with_capacity(chunk.len());

        for &idx in chunk {
            let inst = &self.dataset[idx];
            let views = augment(inst, view_count, &mut self.rng);
            let query_pass = self.query_encoder.forward(&views[0])?;
            let keys: Vec<EmbeddingVec> = views[1..]
                .iter()
                .map(|v| self.key_encoder.encode(v))
                .collect::<Result<_>>()?;

            let result = match self.method {
                Method::Jcl => {
                    let stats = compute_covariance(&keys)?;
                    if !stats_psd_check(&stats) {
                        return Err(Error::NotPositiveSemidefinite);
                    }
                    let loss = jcl_loss(
                        &ContrastiveInstance {
                            query: query_pass.output(),
                            stats: &stats,
                            negatives: &negatives,
                        },
                        params,
                    )?;
                    batch_means.push(stats.mean);
                    loss
                }
                Method::Infonce => {
                    let loss = pair_loss_with_grad(
                        query_pass.output(),
                        &keys[0],
                        &negatives,
                        params.tau,
                    )?;
                    batch_means.push(compute_mean(&keys)?);
                    loss
                }
                Method::Vanilla => {
                    let loss = vanilla_multi_key_loss_with_grad(
                        query_pass.output(),
                        &keys,
                        &negatives,
                        params.tau,
                    )?;
                    batch_means.push(compute_mean(&keys)?);
                    loss
                }
            };
            passes.push(query_pass);
            results.push(result);
        }

        let (batch_loss, query_grads) = {
            let (v, g) = reduce_batch(results);
            (v, g)
        };

        let mut total = EncoderGrads::zeros_like(&self.query_encoder);
        for (pass, grad) in passes.iter().zip(&query_grads) {
            let g = self.query_encoder.backward(pass, grad.as_slice())?;
            total.accumulate(&g);
        }
        let grad_norm = total.norm();

        self.optimizer.step(&mut self.query_encoder, &total, lr)?;
        momentum_update(&mut self.key_encoder, &self.query_encoder, self.config.momentum)?;
        self.queue.push_batch(batch_means);
        Ok((batch_loss, grad_norm))
    }
}

/// Full run with the closed-form loss; returns the query encoder and log.
pub fn train(config: &TrainConfig) -> Result<(EncoderParams, TrainLog)> {
    train_with_method(config, Method::Jcl)
}

/// Comparison arm: identical loop driven by the single-key pair loss.
pub fn train_baseline(config: &TrainConfig) -> Result<(EncoderParams, TrainLog)> {
    train_with_method(config, Method::Infonce)
}

pub fn train_with_method(
    config: &TrainConfig,
    method: Method,
) -> Result<(EncoderParams, TrainLog)> {
    let mut trainer = Trainer::new(config, method)?;
    trainer.run_to_completion()?;
    let log = trainer.log().clone();
    Ok((trainer.query_encoder, log))
}
