use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training configuration shared by HINet and the baselines. Baselines
/// ignore `alpha` and `use_gin_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HiNetConfig {
    pub hidden_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub alpha: f64,
    /// `false` drops the treatment-branch GIN so `d_T` sees only `GRL(φ_i)`.
    pub use_gin_t: bool,
    pub seed: u64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
}

fn default_weight_decay() -> f64 {
    1e-3
}

/// Caps that keep a decoded checkpoint from requesting absurd allocations.
pub const MAX_HIDDEN_SIZE: usize = 1024;
pub const MAX_INPUT_DIM: usize = 4096;

impl Default for HiNetConfig {
    fn default() -> Self {
        Self {
            hidden_size: 32,
            epochs: 1000,
            learning_rate: 1e-3,
            dropout: 0.0,
            alpha: 0.0,
            use_gin_t: true,
            seed: 0,
            weight_decay: default_weight_decay(),
        }
    }
}

impl HiNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 || self.hidden_size > MAX_HIDDEN_SIZE {
            return Err(Error::param(
                "hidden_size",
                format!("must be in 1..={MAX_HIDDEN_SIZE}"),
            ));
        }
        if self.epochs == 0 {
            return Err(Error::param("epochs", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param("learning_rate", "must be positive and finite"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::param("dropout", "must lie in [0, 1)"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::param("alpha", "must be finite and >= 0"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::param("weight_decay", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Search grids for the tuned hyperparameters. Defaults are the ranges the
/// method was published with; any list may be replaced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperGrid {
    pub hidden_size: Vec<usize>,
    pub epochs: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub dropout: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        Self {
            hidden_size: vec![16, 32],
            epochs: vec![500, 1000, 2000],
            learning_rate: vec![0.001, 0.0005, 0.0001],
            dropout: vec![0.0, 0.1, 0.2],
            alpha: vec![0.0, 0.025, 0.05, 0.1, 0.2, 0.3],
        }
    }
}

impl HyperGrid {
    /// A grid with exactly one point per axis (and the given alphas).
    pub fn single(config: &HiNetConfig, alpha: Vec<f64>) -> Self {
        Self {
            hidden_size: vec![config.hidden_size],
            epochs: vec![config.epochs],
            learning_rate: vec![config.learning_rate],
            dropout: vec![config.dropout],
            alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("hidden_size", self.hidden_size.is_empty()),
            ("epochs", self.epochs.is_empty()),
            ("learning_rate", self.learning_rate.is_empty()),
            ("dropout", self.dropout.is_empty()),
            ("alpha", self.alpha.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::param(name, "grid must not be empty"));
        }
        if self.alpha.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::param("alpha", "grid values must be finite and >= 0"));
        }
        Ok(())
    }

    /// Every non-alpha combination, with `alpha = 0`, in a fixed order.
    pub fn base_configs(&self, template: &HiNetConfig) -> Vec<HiNetConfig> {
        let mut out = Vec::new();
        for &hidden_size in &self.hidden_size {
            for &epochs in &self.epochs {
                for &learning_rate in &self.learning_rate {
                    for &dropout in &self.dropout {
                        out.push(HiNetConfig {
                            hidden_size,
                            epochs,
                            learning_rate,
                            dropout,
                            alpha: 0.0,
                            ..*template
                        });
                    }
                }
            }
        }
        out
    }
}
