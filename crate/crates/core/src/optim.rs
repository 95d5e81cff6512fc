//! SGD with momentum and weight decay, plus the cosine learning-rate decay.

use serde::{Deserialize, Serialize};

use crate::encoder::{EncoderGrads, EncoderParams};
use crate::error::{Error, Result};

/// SGD with momentum: v ← μ·v + (g + wd·θ); θ ← θ − lr·v.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SgdOptimizer {
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: Vec<Vec<f64>>,
}

impl SgdOptimizer {
    pub fn new(momentum: f64, weight_decay: f64) -> Self {
        Self {
            momentum,
            weight_decay,
            velocity: Vec::new(),
        }
    }

    pub fn velocity(&self) -> &[Vec<f64>] {
        &self.velocity
    }

    pub fn restore_velocity(&mut self, velocity: Vec<Vec<f64>>) {
        self.velocity = velocity;
    }

    /// One update step. Errors on non-finite gradients and on parameters
    /// leaving the finite range.
    pub fn step(
        &mut self,
        params: &mut EncoderParams,
        grads: &EncoderGrads,
        lr: f64,
    ) -> Result<()> {
        if !lr.is_finite() || lr < 0.0 {
            return Err(Error::InvalidParameter {
                name: "learning_rate",
                value: lr,
            });
        }
        if !grads.all_finite() {
            return Err(Error::NonFinite("parameter gradients"));
        }
        if params.layers.len() != grads.layers.len() {
            return Err(Error::ArchitectureMismatch("gradient shape"));
        }
        if self.velocity.is_empty() {
            self.velocity = params
                .layers
                .iter()
                .map(|l| vec![0.0; l.weights.len() + l.bias.len()])
                .collect();
        }
        for (li, (layer, grad)) in params.layers.iter_mut().zip(&grads.layers).enumerate() {
            if layer.weights.len() != grad.weights.len() || layer.bias.len() != grad.bias.len() {
                return Err(Error::ArchitectureMismatch("gradient shape"));
            }
            let vel = &mut self.velocity[li];
            let nw = layer.weights.len();
            for (i, (w, g)) in layer.weights.iter_mut().zip(&grad.weights).enumerate() {
                let adjusted = g + self.weight_decay * *w;
                vel[i] = self.momentum * vel[i] + adjusted;
                *w -= lr * vel[i];
            }
            for (i, (b, g)) in layer.bias.iter_mut().zip(&grad.bias).enumerate() {
                let adjusted = g + self.weight_decay * *b;
                vel[nw + i] = self.momentum * vel[nw + i] + adjusted;
                *b -= lr * vel[nw + i];
            }
        }
        if !params.all_finite() {
            return Err(Error::NonFinite("parameters after update"));
        }
        Ok(())
    }
}

/// Cosine decay: lr₀ · ½(1 + cos(π·step/total)).
pub fn cosine_lr(step: usize, total: usize, lr0: f64) -> f64 {
    if total == 0 {
        return lr0;
    }
    let frac = step as f64 / total as f64;
    lr0 * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{Activation, LayerParams};

    fn scalar_encoder(theta: f64) -> EncoderParams {
        EncoderParams {
            layers: vec![LayerParams {
                in_dim: 1,
                out_dim: 1,
                weights: vec![theta],
                bias: vec![0.0],
            }],
            activation: Activation::Identity,
            normalize_output: false,
        }
    }

    fn scalar_grad(g: f64) -> EncoderGrads {
        EncoderGrads {
            layers: vec![crate::encoder::LayerGrads {
                weights: vec![g],
                bias: vec![0.0],
            }],
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut params = scalar_encoder(1.5);
        let mut opt = SgdOptimizer::new(0.9, 0.0);
        opt.step(&mut params, &scalar_grad(0.0), 0.1).unwrap();
        assert_eq!(params.layers[0].weights[0], 1.5);
    }

    #[test]
    fn plain_sgd_single_step() {
        let mut params = scalar_encoder(1.0);
        let mut opt = SgdOptimizer::new(0.0, 0.0);
        opt.step(&mut params, &scalar_grad(1.0), 0.1).unwrap();
        assert!((params.layers[0].weights[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn momentum_accumulates_velocity() {
        // v1 = 1, θ = 1 − 0.1; v2 = 0.9 + 1 = 1.9, θ = 0.9 − 0.19 = 0.71.
        let mut params = scalar_encoder(1.0);
        let mut opt = SgdOptimizer::new(0.9, 0.0);
        opt.step(&mut params, &scalar_grad(1.0), 0.1).unwrap();
        opt.step(&mut params, &scalar_grad(1.0), 0.1).unwrap();
        assert!((params.layers[0].weights[0] - 0.71).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_errors() {
        let mut params = scalar_encoder(1.0);
        let mut opt = SgdOptimizer::new(0.9, 0.0);
        assert!(opt.step(&mut params, &scalar_grad(f64::NAN), 0.1).is_err());
    }

    #[test]
    fn cosine_schedule_endpoints_and_midpoint() {
        assert_eq!(cosine_lr(0, 100, 0.5), 0.5);
        assert!(cosine_lr(100, 100, 0.5).abs() < 1e-16);
        assert!((cosine_lr(50, 100, 0.5) - 0.25).abs() < 1e-15);
    }
}
