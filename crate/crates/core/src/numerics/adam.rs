use serde::{Deserialize, Serialize};

use super::Tensor2;
use crate::{Error, Result};

/// How weight decay enters the update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightDecayMode {
    /// `param -= lr * wd * param`, independent of the adaptive scaling.
    #[default]
    Decoupled,
    /// `grad += wd * param` before the moment updates (classic L2).
    Coupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub decay_mode: WeightDecayMode,
}

impl AdamConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            decay_mode: WeightDecayMode::Decoupled,
        }
    }
}

/// Moment estimates for a fixed list of parameter tensors.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Vec<Tensor2>,
    second: Vec<Tensor2>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[Tensor2]) -> Self {
        let zeros: Vec<Tensor2> = params
            .iter()
            .map(|p| Tensor2::zeros(p.rows(), p.cols()))
            .collect();
        Self {
            config,
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update, in place.
    pub fn step(&mut self, params: &mut [Tensor2], grads: &[Tensor2]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::Shape {
                op: "adam_step",
                left: (params.len(), 0),
                right: (grads.len(), self.first.len()),
            });
        }
        for (p, g) in params.iter().zip(grads) {
            p.check_same(g, "adam_step")?;
            if !g.is_finite() {
                return Err(Error::Diverged("non-finite gradient".into()));
            }
        }
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
            decay_mode,
        } = self.config;
        let t = self.step as f64;
        let bias1 = 1.0 - beta1.powf(t);
        let bias2 = 1.0 - beta2.powf(t);

        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            let it = p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
            for ((w, &grad), (mi, vi)) in it {
                let grad = match decay_mode {
                    WeightDecayMode::Coupled => grad + weight_decay * *w,
                    WeightDecayMode::Decoupled => grad,
                };
                *mi = beta1 * *mi + (1.0 - beta1) * grad;
                *vi = beta2 * *vi + (1.0 - beta2) * grad * grad;
                let m_hat = *mi / bias1;
                let v_hat = *vi / bias2;
                let mut update = lr * m_hat / (v_hat.sqrt() + eps);
                if decay_mode == WeightDecayMode::Decoupled {
                    update += lr * weight_decay * *w;
                }
                *w -= update;
            }
        }
        Ok(())
    }
}
