//! Text checkpoints: a JSON document with a format-version field, the full
//! configuration, the RNG state, and every parameter array with explicit
//! shape in row-major order. Numbers serialize through shortest-round-trip
//! decimal, so reloading reproduces the saved state bit-for-bit and a
//! resumed run matches the equivalent uninterrupted run exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::EncoderParams;
use crate::error::{Error, Result};
use crate::numerics::{EmbeddingVec, RngState};
use crate::optim::SgdOptimizer;
use crate::trainer::{Method, TrainConfig, TrainLog, Trainer};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub method: Method,
    pub config: TrainConfig,
    pub epochs_completed: usize,
    pub global_step: usize,
    pub rng: RngState,
    pub query_encoder: EncoderParams,
    pub key_encoder: EncoderParams,
    pub optimizer: SgdOptimizer,
    pub queue: Vec<EmbeddingVec>,
    pub log: TrainLog,
}

impl Checkpoint {
    pub fn from_trainer(trainer: &Trainer) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            method: trainer.method(),
            config: trainer.config().clone(),
            epochs_completed: trainer.epochs_done(),
            global_step: trainer.global_step(),
            rng: trainer.rng_state(),
            query_encoder: trainer.query_encoder().clone(),
            key_encoder: trainer.key_encoder().clone(),
            optimizer: trainer.optimizer().clone(),
            queue: trainer.queue().to_vec(),
            log: trainer.log().clone(),
        }
    }

    pub fn into_trainer(self) -> Result<Trainer> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        Trainer::restore(
            self.config,
            self.method,
            self.query_encoder,
            self.key_encoder,
            self.optimizer,
            self.queue,
            &self.rng,
            self.epochs_completed,
            self.global_step,
            self.log,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
        let ck: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("cannot parse {}: {e}", path.display())))?;
        if ck.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {} (expected {FORMAT_VERSION})",
                ck.format_version
            )));
        }
        Ok(ck)
    }
}
