use serde::{Deserialize, Serialize};

use super::config::HiNetConfig;
use super::mlp::ForwardCtx;
use super::network::{build_loss, treatment_column, Architecture, Branches, LossSpec, Model};
use crate::autodiff::{Adam, AdamSettings, Tape};
use crate::dgp::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// Factual losses recorded after each epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub epoch: usize,
    /// Outcome MSE of the train-mode forward pass that produced the update.
    pub train_loss: f64,
    /// Eval-mode outcome MSE on the validation split after the update.
    pub val_loss: f64,
}

/// Eval-mode outcome MSE against the dataset's observed outcomes.
pub fn factual_loss(model: &Model, dataset: &Dataset) -> Result<f64> {
    let pred = model.predict(dataset.graph(), dataset.features(), dataset.treatments())?;
    Ok(mse(&pred, dataset.outcomes()))
}

fn mse(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / y.len() as f64
}

/// Full-batch training for `config.epochs` epochs. Baselines ignore `alpha`.
pub fn train(
    architecture: Architecture,
    config: &HiNetConfig,
    train_set: &Dataset,
    val_set: &Dataset,
) -> Result<(Model, Vec<EpochLosses>)> {
    let run = train_run(architecture, config, train_set, val_set, &[])?;
    match run.failure {
        Some(err) => Err(err),
        None => Ok((run.model, run.history)),
    }
}

/// A training run that may have stopped early on divergence.
pub(crate) struct Run {
    pub model: Model,
    pub history: Vec<EpochLosses>,
    /// Models as they stood after each requested epoch that was reached,
    /// with `epochs` in their config set accordingly.
    pub snapshots: Vec<Model>,
    pub failure: Option<Error>,
}

/// Trains like [`train`], also snapshotting the model after each epoch in
/// `snapshot_at`. A run with fewer epochs is an exact prefix of a longer
/// run with otherwise equal config, so one run serves every epoch count.
pub(crate) fn train_run(
    architecture: Architecture,
    config: &HiNetConfig,
    train_set: &Dataset,
    val_set: &Dataset,
    snapshot_at: &[usize],
) -> Result<Run> {
    if train_set.d() != val_set.d() {
        return Err(Error::InvalidInput(format!(
            "train split has d = {}, validation split has d = {}",
            train_set.d(),
            val_set.d()
        )));
    }
    let mut model = Model::new(architecture, *config, train_set.d())?;
    let mut optimizer = Adam::new(AdamSettings {
        weight_decay: config.weight_decay,
        ..AdamSettings::with_lr(config.learning_rate)
    });
    let mut rng = seed::rng(config.seed, "model/dropout", 0);
    let t_col = treatment_column(train_set.treatments());
    let alpha = if architecture == Architecture::Hinet {
        config.alpha
    } else {
        0.0
    };
    // With alpha = 0 the treatment branch cannot influence any parameter
    // through the loss, so it is not recorded.
    let spec = LossSpec {
        alpha,
        outcome_term: true,
        treatment_term: alpha > 0.0,
        reverse_gradients: true,
    };
    let branches = Branches {
        treatment: spec.treatment_term,
        reverse_gradients: true,
    };

    let mut history = Vec::with_capacity(config.epochs);
    let mut snapshots = Vec::new();
    for epoch in 1..=config.epochs {
        match step(&mut model, &mut optimizer, &mut rng, train_set, val_set, &t_col, &spec, branches, epoch) {
            Ok(losses) => history.push(losses),
            Err(err) => {
                return Ok(Run {
                    model,
                    history,
                    snapshots,
                    failure: Some(err),
                })
            }
        }
        if snapshot_at.contains(&epoch) {
            let mut snap = model.clone();
            snap.set_epochs(epoch);
            snapshots.push(snap);
        }
    }
    Ok(Run {
        model,
        history,
        snapshots,
        failure: None,
    })
}

#[allow(clippy::too_many_arguments)]
fn step(
    model: &mut Model,
    optimizer: &mut Adam,
    rng: &mut rand_chacha::ChaCha8Rng,
    train_set: &Dataset,
    val_set: &Dataset,
    t_col: &crate::tensor::Tensor,
    spec: &LossSpec,
    branches: Branches,
    epoch: usize,
) -> Result<EpochLosses> {
    let mut tape = Tape::new();
    let handles = model.params().register(&mut tape);
    let xv = tape.constant(train_set.features().clone());
    let tv = tape.constant(t_col.clone());
    let mut ctx = ForwardCtx {
        dropout: model.config().dropout,
        rng: Some(rng),
    };
    let out = model.record(&mut tape, &handles, train_set.graph(), xv, tv, branches, &mut ctx)?;
    let train_loss = mse(tape.value(out.y_hat).data(), train_set.outcomes());
    let loss = build_loss(&mut tape, &out, train_set.outcomes(), t_col.clone(), spec)?;
    let total = tape.value(loss).item();
    if !total.is_finite() {
        return Err(Error::TrainingFailed { epoch, loss: total });
    }
    let mut grads = tape.backward(loss)?;
    model.params_mut().collect_grads(&handles, &mut grads);
    optimizer.step(model.params_mut());
    if model.params().iter().any(|p| !p.value.all_finite()) {
        return Err(Error::TrainingFailed { epoch, loss: f64::NAN });
    }
    let val_loss = factual_loss(model, val_set)?;
    if !val_loss.is_finite() {
        return Err(Error::TrainingFailed { epoch, loss: val_loss });
    }
    Ok(EpochLosses {
        epoch,
        train_loss,
        val_loss,
    })
}
