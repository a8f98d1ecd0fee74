use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamSettings {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Coupled L2: `weight_decay * param` is added to the gradient before
    /// the moment updates.
    pub weight_decay: f64,
}

impl AdamSettings {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamSettings {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-3,
        }
    }
}

/// Adam with bias correction. Moments are created lazily per parameter and
/// parameters without a gradient are left untouched.
#[derive(Debug, Clone)]
pub struct Adam {
    settings: AdamSettings,
    step: u64,
    first: Vec<Option<Tensor>>,
    second: Vec<Option<Tensor>>,
}

impl Adam {
    pub fn new(settings: AdamSettings) -> Self {
        Self {
            settings,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update from the accumulated gradients, then clears them.
    pub fn step(&mut self, store: &mut ParamStore) {
        let s = self.settings;
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - s.beta1.powi(t);
        let bias2 = 1.0 - s.beta2.powi(t);
        if self.first.len() < store.len() {
            self.first.resize(store.len(), None);
            self.second.resize(store.len(), None);
        }
        for (idx, p) in store.iter_mut().enumerate() {
            let Some(grad) = p.grad.take() else {
                continue;
            };
            let (rows, cols) = p.value.shape();
            let m = self.first[idx].get_or_insert_with(|| Tensor::zeros(rows, cols));
            let v = self.second[idx].get_or_insert_with(|| Tensor::zeros(rows, cols));
            for (((w, &g), mi), vi) in p
                .value
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                let g = g + s.weight_decay * *w;
                *mi = s.beta1 * *mi + (1.0 - s.beta1) * g;
                *vi = s.beta2 * *vi + (1.0 - s.beta2) * g * g;
                let m_hat = *mi / bias1;
                let v_hat = *vi / bias2;
                *w -= s.learning_rate * m_hat / (v_hat.sqrt() + s.eps);
            }
        }
    }
}
