use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::Model;
use crate::dgp::Dataset;
use crate::error::{Error, Result};
use crate::seed;
use crate::tensor::Tensor;

/// At most this many rows per group enter the kernel sums.
const MAX_GROUP: usize = 1000;

/// Squared MMD between representations grouped by own treatment and by the
/// treatment of one uniformly sampled neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub own_treatment: f64,
    pub neighbor_treatment: f64,
}

fn rbf(a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-0.5 * d2).exp()
}

fn mean_kernel(a: &[&[f64]], b: &[&[f64]]) -> f64 {
    let total: f64 = a
        .iter()
        .map(|x| b.iter().map(|y| rbf(x, y)).sum::<f64>())
        .sum();
    total / (a.len() * b.len()) as f64
}

/// Biased squared MMD with the unit-bandwidth RBF kernel
/// `k(a, b) = exp(-|a - b|² / 2)`.
pub fn mmd_squared(a: &[&[f64]], b: &[&[f64]]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::UndefinedStatistic("MMD needs two non-empty groups"));
    }
    let v = mean_kernel(a, a) + mean_kernel(b, b) - 2.0 * mean_kernel(a, b);
    Ok(v.max(0.0))
}

fn grouped_mmd(phi: &Tensor, rows: &[(usize, bool)], seed: u64, label: &str) -> Result<f64> {
    let mut groups: [Vec<&[f64]>; 2] = [Vec::new(), Vec::new()];
    for &(i, treated) in rows {
        groups[usize::from(treated)].push(phi.row(i));
    }
    let mut rng = seed::rng(seed, label, 0);
    for g in &mut groups {
        if g.len() > MAX_GROUP {
            let mut keep = sample(&mut rng, g.len(), MAX_GROUP).into_vec();
            keep.sort_unstable();
            *g = keep.into_iter().map(|k| g[k]).collect();
        }
    }
    mmd_squared(&groups[1], &groups[0])
}

/// Balance of the model's representation `φ` on a dataset. Models without a
/// representation (the GIN baseline) yield `None`.
pub fn balancing_diagnostic(
    model: &Model,
    dataset: &Dataset,
    seed: u64,
) -> Result<Option<BalanceReport>> {
    let Some(phi) =
        model.representation(dataset.graph(), dataset.features(), dataset.treatments())?
    else {
        return Ok(None);
    };
    let t = dataset.treatments();
    let graph = dataset.graph();
    let own: Vec<(usize, bool)> = (0..dataset.n()).map(|i| (i, t[i] == 1)).collect();
    let mut rng = seed::rng(seed, "balance/neighbor", 0);
    let neighbor: Vec<(usize, bool)> = (0..dataset.n())
        .filter_map(|i| {
            let nb = graph.neighbors(i);
            (!nb.is_empty()).then(|| (i, t[nb[rng.random_range(0..nb.len())]] == 1))
        })
        .collect();
    Ok(Some(BalanceReport {
        own_treatment: grouped_mmd(&phi, &own, seed, "balance/own")?,
        neighbor_treatment: grouped_mmd(&phi, &neighbor, seed, "balance/neighbor_subsample")?,
    }))
}
