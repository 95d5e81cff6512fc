//! Dense vector primitives: dot products, normalization, and the stable
//! log-sum-exp reduction everything else is built on.
//!
//! All arithmetic is f64 with a fixed left-to-right summation order, so every
//! operation is bit-reproducible across runs and platforms.

mod covariance;
mod rng;

pub use covariance::{quadratic_form, CovarianceMatrix, SemidefiniteFactor};
pub use rng::{sample_gaussian, GaussianSampler, Rng, RngState};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on |‖v‖₂ − 1| for a vector to count as unit-normalized.
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// A d-dimensional real feature vector (query or key embedding).
///
/// Construction rejects NaN/Inf entries; everything downstream may assume
/// finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVec(Vec<f64>);

impl EmbeddingVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("embedding vector"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding vector"));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Whether the vector satisfies the unit-norm invariant.
    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_NORM_TOL
    }
}

impl std::ops::Index<usize> for EmbeddingVec {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Dot product Σᵢ aᵢ·bᵢ, accumulated left to right in f64.
///
/// ```
/// use jcl_core::numerics::{dot, EmbeddingVec};
/// let a = EmbeddingVec::new(vec![1.0, 0.0]).unwrap();
/// let b = EmbeddingVec::new(vec![0.0, 1.0]).unwrap();
/// assert_eq!(dot(&a, &b).unwrap(), 0.0);
/// ```
pub fn dot(a: &EmbeddingVec, b: &EmbeddingVec) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(dot_slices(a.as_slice(), b.as_slice()))
}

pub(crate) fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Scales `v` to unit ℓ2 norm. Errors on the zero vector.
pub fn l2_normalize(v: &EmbeddingVec) -> Result<EmbeddingVec> {
    let norm = v.norm();
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    if !norm.is_finite() {
        return Err(Error::NonFinite("vector norm"));
    }
    Ok(EmbeddingVec(v.as_slice().iter().map(|x| x / norm).collect()))
}

/// log Σᵢ exp(tᵢ) via max-subtraction, shift-invariant and overflow-safe.
///
/// A single-element input returns that element exactly.
pub fn log_sum_exp(terms: &[f64]) -> Result<f64> {
    if terms.is_empty() {
        return Err(Error::EmptyInput("log_sum_exp terms"));
    }
    if terms.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("log_sum_exp terms"));
    }
    let max = terms.iter().fold(f64::NEG_INFINITY, |m, &t| m.max(t));
    let mut sum = 0.0;
    for &t in terms {
        sum += (t - max).exp();
    }
    Ok(max + sum.ln())
}
