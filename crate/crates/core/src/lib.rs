//! Joint contrastive learning at desk scale.
//!
//! The crate implements the closed-form infinite-positive-key contrastive
//! loss together with everything needed to exercise it end to end:
//!
//! - [`numerics`]: dense f64 vectors and symmetric matrices, stable
//!   log-sum-exp, PSD-tolerant Cholesky, and seedable Gaussian sampling;
//! - [`stats`]: per-instance mean/covariance of positive keys;
//! - [`losses`]: the pairwise softmax loss, its Monte-Carlo infinite-key
//!   oracle, and the closed-form bound with analytical query gradients;
//! - [`encoder`], [`optim`], [`queue`], [`data`], [`trainer`]: a small MLP
//!   encoder pair (query + momentum key encoder), a FIFO negative queue of
//!   enqueued key means, SGD with cosine decay, a synthetic
//!   instance-discrimination dataset, and the full training loop;
//! - [`checkpoint`]: a text checkpoint format that restores a run
//!   bit-exactly, including mid-training resume.
//!
//! Everything is single-threaded and deterministic under a fixed seed: the
//! same configuration produces the same losses, gradients, and parameters to
//! the last bit on any platform.

// Numeric kernels use explicit indexed loops to pin evaluation order.
#![allow(clippy::needless_range_loop)]

pub mod checkpoint;
pub mod data;
pub mod encoder;
pub mod error;
pub mod losses;
pub mod numerics;
pub mod optim;
pub mod queue;
pub mod stats;
pub mod trainer;

pub use error::{Error, Result};
