//! Model selection from factual validation loss: a grid search at `α = 0`
//! followed by the α heuristic on the selected configuration.

use serde::{Deserialize, Serialize};

use crate::dgp::Dataset;
use crate::error::{Error, Result};
use crate::model::{train_run, Architecture, EpochLosses, HiNetConfig, HyperGrid, Model};
use crate::seed;

/// Default tolerated relative increase in validation loss.
pub const DEFAULT_ALPHA_TOLERANCE: f64 = 0.10;

/// Largest `α` whose loss stays strictly below `(1 + p)` times the loss at
/// `α = 0`. `α = 0` itself always qualifies.
pub fn select_alpha(losses: &[(f64, f64)], p: f64) -> Result<f64> {
    if !(p >= 0.0 && p.is_finite()) {
        return Err(Error::param("p", "tolerance must be finite and >= 0"));
    }
    let base = losses
        .iter()
        .find(|(a, _)| *a == 0.0)
        .map(|&(_, l)| l)
        .ok_or_else(|| Error::InvalidInput("loss table has no entry for alpha = 0".into()))?;
    let threshold = (1.0 + p) * base;
    Ok(losses
        .iter()
        .filter(|&&(a, l)| a > 0.0 && l < threshold)
        .map(|&(a, _)| a)
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossEntry {
    pub config: HiNetConfig,
    /// `None` when the run diverged before reaching `config.epochs`.
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaEntry {
    pub alpha: f64,
    /// Mean over the sweep seeds; `None` if any of them diverged.
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub selected_config: HiNetConfig,
    pub loss_table: Vec<LossEntry>,
    /// Absent when no α sweep ran (baselines and fixed-α estimators).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_table: Option<Vec<AlphaEntry>>,
    pub loss_at_alpha_zero: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningOptions {
    /// Relative tolerance `p` of the α heuristic.
    pub alpha_tolerance: f64,
    /// Seeds averaged per α before thresholding.
    pub alpha_seeds: usize,
    /// Run the α sweep at all; `false` keeps `α = 0`.
    pub sweep_alpha: bool,
}

impl Default for TuningOptions {
    fn default() -> Self {
        Self {
            alpha_tolerance: DEFAULT_ALPHA_TOLERANCE,
            alpha_seeds: 1,
            sweep_alpha: true,
        }
    }
}

/// Outcome of [`tune`]: the selection record and the selected model.
#[derive(Debug, Clone)]
pub struct Tuned {
    pub result: TuningResult,
    pub model: Model,
    pub history: Vec<EpochLosses>,
}

fn better(a: &(f64, HiNetConfig), b: &(f64, HiNetConfig)) -> bool {
    (a.0, a.1.hidden_size, a.1.learning_rate) < (b.0, b.1.hidden_size, b.1.learning_rate)
}

/// Trains every grid point at `α = 0` and keeps the one with the lowest
/// final validation loss; ties go to the smaller hidden size, then the
/// smaller learning rate. Epoch counts share one run per remaining
/// combination, read off at each count.
pub fn grid_search(
    architecture: Architecture,
    train_set: &Dataset,
    val_set: &Dataset,
    grid: &HyperGrid,
    template: &HiNetConfig,
) -> Result<Tuned> {
    grid.validate()?;
    let mut epochs = grid.epochs.clone();
    epochs.sort_unstable();
    epochs.dedup();
    let longest = *epochs.last().expect("validated non-empty");

    let mut loss_table = Vec::new();
    let mut best: Option<(f64, HiNetConfig, Model, Vec<EpochLosses>)> = None;
    let mut combos = HyperGrid { epochs: vec![longest], ..grid.clone() }.base_configs(template);
    combos.dedup();
    for combo in combos {
        combo.validate()?;
        let run = train_run(architecture, &combo, train_set, val_set, &epochs)?;
        for &e in &grid.epochs {
            let config = HiNetConfig { epochs: e, ..combo };
            let snapshot = run.snapshots.iter().find(|m| m.config().epochs == e);
            let val_loss = snapshot.map(|_| run.history[e - 1].val_loss);
            loss_table.push(LossEntry { config, val_loss });
            let (Some(loss), Some(model)) = (val_loss, snapshot) else {
                continue;
            };
            let replace = best
                .as_ref()
                .is_none_or(|(bl, bc, _, _)| better(&(loss, config), &(*bl, *bc)));
            if replace {
                best = Some((loss, config, model.clone(), run.history[..e].to_vec()));
            }
        }
    }
    let (loss, config, model, history) = best.ok_or(Error::TuningFailed)?;
    Ok(Tuned {
        result: TuningResult {
            selected_config: config,
            loss_table,
            alpha_table: None,
            loss_at_alpha_zero: loss,
        },
        model,
        history,
    })
}

/// Grid search at `α = 0`, then, for HINet, the α sweep on the selected
/// configuration and the α heuristic.
pub fn tune(
    architecture: Architecture,
    train_set: &Dataset,
    val_set: &Dataset,
    grid: &HyperGrid,
    template: &HiNetConfig,
    options: &TuningOptions,
) -> Result<Tuned> {
    if options.alpha_seeds == 0 {
        return Err(Error::param("alpha_seeds", "must be at least 1"));
    }
    let stage_one = grid_search(architecture, train_set, val_set, grid, template)?;
    if architecture != Architecture::Hinet || !options.sweep_alpha {
        return Ok(stage_one);
    }
    let base = stage_one.result.selected_config;
    let loss0 = stage_one.result.loss_at_alpha_zero;
    let mut alphas: Vec<f64> = grid.alpha.iter().copied().filter(|&a| a > 0.0).collect();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();

    let mut table = vec![AlphaEntry {
        alpha: 0.0,
        val_loss: Some(loss0),
    }];
    let mut models = Vec::new();
    for &alpha in &alphas {
        let mut total = Some(0.0);
        let mut first = None;
        for k in 0..options.alpha_seeds {
            let seed = if k == 0 { base.seed } else { seed::derive(base.seed, "tuning/alpha_seed", k as u64) };
            let config = HiNetConfig { alpha, seed, ..base };
            let run = train_run(architecture, &config, train_set, val_set, &[])?;
            match (run.failure, total) {
                (None, Some(t)) => total = Some(t + run.history[config.epochs - 1].val_loss),
                _ => total = None,
            }
            if k == 0 {
                first = Some((run.model, run.history));
            }
        }
        let val_loss = total.map(|t| t / options.alpha_seeds as f64);
        table.push(AlphaEntry { alpha, val_loss });
        models.push((alpha, first.expect("at least one seed")));
    }
    // When seeds are averaged, the α = 0 entry is averaged the same way.
    if options.alpha_seeds > 1 {
        let mut total = Some(loss0);
        for k in 1..options.alpha_seeds {
            let config = HiNetConfig {
                seed: seed::derive(base.seed, "tuning/alpha_seed", k as u64),
                ..base
            };
            let run = train_run(architecture, &config, train_set, val_set, &[])?;
            total = match (run.failure, total) {
                (None, Some(t)) => Some(t + run.history[config.epochs - 1].val_loss),
                _ => None,
            };
        }
        table[0].val_loss = total.map(|t| t / options.alpha_seeds as f64);
    }
    let Some(reference) = table[0].val_loss else {
        return Err(Error::TuningFailed);
    };
    let pairs: Vec<(f64, f64)> = table
        .iter()
        .map(|e| (e.alpha, e.val_loss.unwrap_or(f64::INFINITY)))
        .collect();
    let alpha = select_alpha(&pairs, options.alpha_tolerance)?;
    let (model, history) = if alpha == 0.0 {
        (stage_one.model, stage_one.history)
    } else {
        models
            .into_iter()
            .find(|(a, _)| *a == alpha)
            .map(|(_, mh)| mh)
            .expect("selected alpha was swept")
    };
    Ok(Tuned {
        result: TuningResult {
            selected_config: HiNetConfig { alpha, ..base },
            loss_table: stage_one.result.loss_table,
            alpha_table: Some(table),
            loss_at_alpha_zero: reference,
        },
        model,
        history,
    })
}
