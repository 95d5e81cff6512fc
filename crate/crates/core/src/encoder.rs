//! Small MLP encoders: forward pass, backpropagation to parameters, and the
//! momentum update that keeps the key encoder an exponential moving average
//! of the query encoder.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{l2_normalize, EmbeddingVec, Rng};

/// Fixed hidden nonlinearity, applied after every layer except the last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
        }
    }

    fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// One dense layer, weights stored row-major as `[out][in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerParams {
    fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.out_dim];
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.bias[o];
            for i in 0..self.in_dim {
                acc += row[i] * input[i];
            }
            out[o] = acc;
        }
        out
    }
}

/// Query or key encoder: a stack of dense layers with an optional ℓ2
/// normalization of the final output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub layers: Vec<LayerParams>,
    pub activation: Activation,
    pub normalize_output: bool,
}

/// Gradients shaped like [`EncoderParams`].
#[derive(Debug, Clone)]
pub struct EncoderGrads {
    pub layers: Vec<LayerGrads>,
}

#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Cached intermediate values of one forward pass, enough to backpropagate.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    input: Vec<f64>,
    pre_activations: Vec<Vec<f64>>,
    post_activations: Vec<Vec<f64>>,
    raw_output: Vec<f64>,
    output: EmbeddingVec,
}

/// Which intermediate representation downstream analysis reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureTap {
    /// Last hidden activation (pre-projection). For a single-layer encoder
    /// this falls back to the raw output.
    Backbone,
    /// Final output, after normalization when enabled.
    Projection,
}

impl ForwardPass {
    pub fn output(&self) -> &EmbeddingVec {
        &self.output
    }

    pub fn feature(&self, tap: FeatureTap) -> Vec<f64> {
        match tap {
            FeatureTap::Backbone => {
                if self.post_activations.len() >= 2 {
                    self.post_activations[self.post_activations.len() - 2].clone()
                } else {
                    self.raw_output.clone()
                }
            }
            FeatureTap::Projection => self.output.as_slice().to_vec(),
        }
    }
}

impl EncoderParams {
    /// Seeded initialization: weights and biases uniform in ±1/√fan_in.
    pub fn init(
        dims: &[usize],
        activation: Activation,
        normalize_output: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidConfig(
                "encoder needs at least input and output dimensions".into(),
            ));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidConfig("encoder dimensions must be positive".into()));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let weights = (0..fan_in * fan_out)
                .map(|_| rng.uniform(-bound, bound))
                .collect();
            let bias = (0..fan_out).map(|_| rng.uniform(-bound, bound)).collect();
            layers.push(LayerParams {
                in_dim: fan_in,
                out_dim: fan_out,
                weights,
                bias,
            });
        }
        Ok(Self {
            layers,
            activation,
            normalize_output,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map(|l| l.in_dim).unwrap_or(0)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim).unwrap_or(0)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Forward pass keeping the per-layer cache for backpropagation.
    pub fn forward(&self, input: &[f64]) -> Result<ForwardPass> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let n_layers = self.layers.len();
        let mut pre = Vec::with_capacity(n_layers);
        let mut post = Vec::with_capacity(n_layers);
        let mut current = input.to_vec();
        for (idx, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&current);
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("encoder activations"));
            }
            let h = if idx + 1 == n_layers {
                z.clone()
            } else {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            };
            pre.push(z);
            post.push(h.clone());
            current = h;
        }
        let raw_output = current;
        let raw_vec = EmbeddingVec::new(raw_output.clone())?;
        let output = if self.normalize_output {
            l2_normalize(&raw_vec)?
        } else {
            raw_vec
        };
        Ok(ForwardPass {
            input: input.to_vec(),
            pre_activations: pre,
            post_activations: post,
            raw_output,
            output,
        })
    }

    /// Forward pass returning only the embedding.
    pub fn encode(&self, input: &[f64]) -> Result<EmbeddingVec> {
        Ok(self.forward(input)?.output.clone())
    }

    /// Feature at the requested tap for a single input.
    pub fn feature(&self, input: &[f64], tap: FeatureTap) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.feature(tap))
    }

    /// Backpropagates a gradient on the encoder output down to parameter
    /// gradients. `grad_output` matches the (possibly normalized) output.
    pub fn backward(&self, pass: &ForwardPass, grad_output: &[f64]) -> Result<EncoderGrads> {
        if grad_output.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                got: grad_output.len(),
            });
        }
        // Through the normalization head: for q = y/‖y‖,
        // dL/dy = (g − q·(q·g)) / ‖y‖.
        let mut grad_raw: Vec<f64> = if self.normalize_output {
            let norm = self
                .raw_norm(pass)
                .ok_or(Error::NonFinite("encoder output norm"))?;
            let q = pass.output.as_slice();
            let mut qg = 0.0;
            for i in 0..q.len() {
                qg += q[i] * grad_output[i];
            }
            (0..q.len())
                .map(|i| (grad_output[i] - q[i] * qg) / norm)
                .collect()
        } else {
            grad_output.to_vec()
        };

        let n_layers = self.layers.len();
        let mut layer_grads: Vec<LayerGrads> = Vec::with_capacity(n_layers);
        for idx in (0..n_layers).rev() {
            let layer = &self.layers[idx];
            // grad_raw currently holds dL/dh_idx; map through activation.
            let grad_z: Vec<f64> = if idx + 1 == n_layers {
                grad_raw.clone()
            } else {
                pass.pre_activations[idx]
                    .iter()
                    .zip(&grad_raw)
                    .map(|(z, g)| g * self.activation.derivative(*z))
                    .collect()
            };
            let layer_input: &[f64] = if idx == 0 {
                &pass.input
            } else {
                &pass.post_activations[idx - 1]
            };
            let mut w_grad = vec![0.0; layer.weights.len()];
            for o in 0..layer.out_dim {
                let gz = grad_z[o];
                let row = &mut w_grad[o * layer.in_dim..(o + 1) * layer.in_dim];
                for i in 0..layer.in_dim {
                    row[i] = gz * layer_input[i];
                }
            }
            let b_grad = grad_z.clone();
            // dL/dh_{idx-1} = Wᵀ·grad_z
            let mut grad_prev = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let gz = grad_z[o];
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for i in 0..layer.in_dim {
                    grad_prev[i] += gz * row[i];
                }
            }
            layer_grads.push(LayerGrads {
                weights: w_grad,
                bias: b_grad,
            });
            grad_raw = grad_prev;
        }
        layer_grads.reverse();
        Ok(EncoderGrads {
            layers: layer_grads,
        })
    }

    fn raw_norm(&self, pass: &ForwardPass) -> Option<f64> {
        let n = pass
            .raw_output
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        if n > 0.0 && n.is_finite() {
            Some(n)
        } else {
            None
        }
    }

    pub fn same_architecture(&self, other: &EncoderParams) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.in_dim == b.in_dim && a.out_dim == b.out_dim)
            && self.activation == other.activation
            && self.normalize_output == other.normalize_output
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }
}

impl EncoderGrads {
    pub fn zeros_like(params: &EncoderParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| LayerGrads {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn accumulate(&mut self, other: &EncoderGrads) {
        for (mine, theirs) in self.layers.iter_mut().zip(&other.layers) {
            for (a, b) in mine.weights.iter_mut().zip(&theirs.weights) {
                *a += b;
            }
            for (a, b) in mine.bias.iter_mut().zip(&theirs.bias) {
                *a += b;
            }
        }
    }

    pub fn norm(&self) -> f64 {
        let mut acc = 0.0;
        for l in &self.layers {
            for w in &l.weights {
                acc += w * w;
            }
            for b in &l.bias {
                acc += b * b;
            }
        }
        acc.sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }
}

/// θ_k ← m·θ_k + (1−m)·θ_q for every key-encoder parameter.
pub fn momentum_update(key: &mut EncoderParams, query: &EncoderParams, m: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::InvalidParameter {
            name: "momentum",
            value: m,
        });
    }
    if !key.same_architecture(query) {
        return Err(Error::ArchitectureMismatch(
            "momentum update requires identical encoder shapes",
        ));
    }
    for (kl, ql) in key.layers.iter_mut().zip(&query.layers) {
        for (kw, qw) in kl.weights.iter_mut().zip(&ql.weights) {
            *kw = m * *kw + (1.0 - m) * qw;
        }
        for (kb, qb) in kl.bias.iter_mut().zip(&ql.bias) {
            *kb = m * *kb + (1.0 - m) * qb;
        }
    }
    Ok(())
}
