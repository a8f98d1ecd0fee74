//! The HINet estimator, its two baselines, training and ITTE prediction.

mod balance;
mod checkpoint;
mod config;
mod mlp;
mod network;
mod train;

pub use balance::{balancing_diagnostic, mmd_squared, BalanceReport};
pub use checkpoint::{Checkpoint, CheckpointHeader, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::{HiNetConfig, HyperGrid, MAX_HIDDEN_SIZE, MAX_INPUT_DIM};
pub use network::{combined_loss, Architecture, ForwardOutput, LossSpec, Mode, Model};
pub use train::{factual_loss, train, EpochLosses};
pub(crate) use train::train_run;

use crate::error::Result;
use crate::graph::UndirectedGraph;
use crate::tensor::Tensor;

/// Eval-mode outcome prediction under the assignment `t_cf`.
pub fn predict_potential(
    model: &Model,
    graph: &UndirectedGraph,
    x: &Tensor,
    t_cf: &[u8],
) -> Result<Vec<f64>> {
    model.predict(graph, x, t_cf)
}

/// Estimated ITTE: prediction under `t_cf` minus prediction under the
/// all-zeros assignment.
pub fn estimate_itte(
    model: &Model,
    graph: &UndirectedGraph,
    x: &Tensor,
    t_cf: &[u8],
) -> Result<Vec<f64>> {
    let treated = model.predict(graph, x, t_cf)?;
    let control = model.predict(graph, x, &vec![0; t_cf.len()])?;
    Ok(treated.iter().zip(&control).map(|(a, b)| a - b).collect())
}

