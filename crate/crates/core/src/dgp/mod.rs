//! Synthetic interference data: features, confounded treatments, exposure
//! mappings, outcomes and the noiseless potential-outcome oracle.

mod dataset;
mod params;

pub use dataset::{generate_dataset, potential_outcome_oracle, Dataset, DatasetSeeds, SplitTag};
pub use params::{DgpParams, ExposureKind, GraphSpec};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::UndirectedGraph;
use crate::seed;
use crate::tensor::{sigmoid, Tensor};

/// Linear coefficient vectors of the mechanism, each entry `Unif(-1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightBank {
    pub w_xt: Vec<f64>,
    pub w_xy: Vec<f64>,
    pub w_ty: Vec<f64>,
    pub w_xny: Vec<f64>,
    pub w_tny: Vec<f64>,
}

impl WeightBank {
    pub fn sample(d: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed, "dgp/weights", 0);
        let unif = Uniform::new(-1.0, 1.0).expect("valid bounds");
        let mut draw = || (0..d).map(|_| unif.sample(&mut rng)).collect::<Vec<f64>>();
        Self {
            w_xt: draw(),
            w_xy: draw(),
            w_ty: draw(),
            w_xny: draw(),
            w_tny: draw(),
        }
    }

    pub fn dim(&self) -> usize {
        self.w_xt.len()
    }

    pub(crate) fn validate(&self, d: usize) -> Result<()> {
        let all = [&self.w_xt, &self.w_xy, &self.w_ty, &self.w_xny, &self.w_tny];
        if all.iter().any(|w| w.len() != d) {
            return Err(Error::InvalidInput(format!(
                "weight vectors must have length {d}"
            )));
        }
        if all
            .iter()
            .flat_map(|w| w.iter())
            .any(|v| !(-1.0..=1.0).contains(v))
        {
            return Err(Error::InvalidInput("weights must lie in [-1, 1]".into()));
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `n x d` matrix of i.i.d. standard normal draws.
pub fn sample_features(n: usize, d: usize, seed: u64) -> Result<Tensor> {
    if n < 1 || d < 1 {
        return Err(Error::param("n", "need at least one node and one feature"));
    }
    let mut rng = seed::rng(seed, "dgp/features", 0);
    let data = (0..n * d)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    Tensor::from_vec(n, d, data)
}

/// Applies the logistic sigmoid to the first `ceil(d / 2)` columns; the
/// remaining columns pass through unchanged.
pub fn transform_features(x: &Tensor) -> Tensor {
    let squashed = x.cols().div_ceil(2);
    let mut out = x.clone();
    for r in 0..out.rows() {
        out.row_mut(r)[..squashed]
            .iter_mut()
            .for_each(|v| *v = sigmoid(*v));
    }
    out
}

/// Linear-interpolated percentile (`q` in `[0, 100]`) of unsorted values.
pub(crate) fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Confounded treatment assignment.
///
/// `ν_i = β_xt (w_xt · x_i)` is shifted by its `100 (1 - rate)` percentile
/// and `t_i ~ Bernoulli(σ(ν_i - ν_q))`. At `β_xt = 0` every node is treated
/// with probability 1/2 regardless of the target rate.
pub fn assign_treatments(
    x: &Tensor,
    w_xt: &[f64],
    beta_xt: f64,
    target_treated_rate: f64,
    seed: u64,
) -> Result<Vec<u8>> {
    if w_xt.len() != x.cols() {
        return Err(Error::shape(
            "assign_treatments",
            format!("w_xt has {} entries for {} features", w_xt.len(), x.cols()),
        ));
    }
    if x.rows() == 0 {
        return Ok(Vec::new());
    }
    let nu: Vec<f64> = (0..x.rows())
        .map(|i| beta_xt * dot(w_xt, x.row(i)))
        .collect();
    let cut = percentile(&nu, 100.0 * (1.0 - target_treated_rate));
    let mut rng = seed::rng(seed, "dgp/treatment", 0);
    Ok(nu
        .iter()
        .map(|&v| {
            let p = sigmoid(v - cut);
            u8::from(rng.random::<f64>() < p)
        })
        .collect())
}

fn check_treatments(t: &[u8], n: usize) -> Result<()> {
    if t.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} treatments for {n} nodes",
            t.len()
        )));
    }
    if t.iter().any(|&v| v > 1) {
        return Err(Error::InvalidInput("treatments must be 0 or 1".into()));
    }
    Ok(())
}

fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Per-node exposure `z`. Isolated nodes get `z = 0` for every kind.
pub fn exposure(
    kind: ExposureKind,
    graph: &UndirectedGraph,
    t: &[u8],
    x_tilde: &Tensor,
    w_tny: &[f64],
) -> Result<Vec<f64>> {
    let n = graph.node_count();
    check_treatments(t, n)?;
    if x_tilde.rows() != n || w_tny.len() != x_tilde.cols() {
        return Err(Error::shape(
            "exposure",
            "features or w_tny do not match the graph",
        ));
    }
    let weight: Vec<f64> = match kind {
        ExposureKind::WeightedAvg | ExposureKind::SquaredWeightedAvg => {
            (0..n).map(|j| dot(w_tny, x_tilde.row(j))).collect()
        }
        _ => Vec::new(),
    };
    Ok(exposure_with_weights(kind, graph, t, &weight))
}

/// Exposure given the precomputed per-node spillover weights `w_tny · x̃_j`
/// (only read by the weighted kinds).
fn exposure_with_weights(
    kind: ExposureKind,
    graph: &UndirectedGraph,
    t: &[u8],
    weight: &[f64],
) -> Vec<f64> {
    (0..graph.node_count())
        .map(|i| {
            let nbrs = graph.neighbors(i);
            if nbrs.is_empty() {
                return 0.0;
            }
            let deg = nbrs.len() as f64;
            let treated = nbrs.iter().filter(|&&j| t[j] == 1);
            match kind {
                ExposureKind::WeightedAvg => treated.map(|&j| weight[j]).sum::<f64>() / deg,
                ExposureKind::SquaredWeightedAvg => {
                    treated.map(|&j| weight[j] * weight[j]).sum::<f64>() / deg
                }
                ExposureKind::Sum => treated.count() as f64,
                ExposureKind::Proportion => treated.count() as f64 / deg,
                ExposureKind::Entropy => binary_entropy(treated.count() as f64 / deg) - 0.5,
            }
        })
        .collect()
}

/// Treatment-independent pieces of the outcome equation, cached so repeated
/// potential-outcome queries only recompute the exposure.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct StructuralTerms {
    /// `h_i = w_ty · x̃_i`
    pub individual: Vec<f64>,
    /// `u_i = w_xy · x̃_i`
    pub own: Vec<f64>,
    /// `u_N(i) = mean_j w_xny · x̃_j`, zero for isolated nodes.
    pub neighbor: Vec<f64>,
    /// `w_tny · x̃_j`
    pub spill_weight: Vec<f64>,
}

impl StructuralTerms {
    pub fn new(weights: &WeightBank, graph: &UndirectedGraph, x_tilde: &Tensor) -> Result<Self> {
        let n = graph.node_count();
        if x_tilde.rows() != n {
            return Err(Error::shape("outcome", "feature rows do not match graph"));
        }
        let d = x_tilde.cols();
        let lens = [&weights.w_xy, &weights.w_ty, &weights.w_xny, &weights.w_tny];
        if lens.iter().any(|w| w.len() != d) {
            return Err(Error::shape(
                "outcome",
                "weight length does not match features",
            ));
        }
        let per_node = |w: &[f64]| (0..n).map(|i| dot(w, x_tilde.row(i))).collect::<Vec<f64>>();
        let xny = per_node(&weights.w_xny);
        let neighbor = (0..n)
            .map(|i| {
                let nbrs = graph.neighbors(i);
                if nbrs.is_empty() {
                    0.0
                } else {
                    nbrs.iter().map(|&j| xny[j]).sum::<f64>() / nbrs.len() as f64
                }
            })
            .collect();
        Ok(Self {
            individual: per_node(&weights.w_ty),
            own: per_node(&weights.w_xy),
            neighbor,
            spill_weight: per_node(&weights.w_tny),
        })
    }

    pub fn outcomes(
        &self,
        params: &DgpParams,
        graph: &UndirectedGraph,
        t: &[u8],
        noise: Option<&[f64]>,
    ) -> Result<Vec<f64>> {
        let n = graph.node_count();
        check_treatments(t, n)?;
        if let Some(eps) = noise {
            if eps.len() != n {
                return Err(Error::InvalidInput(format!(
                    "{} noise values for {n} nodes",
                    eps.len()
                )));
            }
        }
        let z = exposure_with_weights(params.exposure_kind, graph, t, &self.spill_weight);
        Ok((0..n)
            .map(|i| {
                let eps = noise.map_or(0.0, |e| e[i]);
                params.beta_individual * self.individual[i] * f64::from(t[i])
                    + params.beta_spillover * z[i]
                    + params.beta_xy * self.own[i]
                    + params.beta_xny * self.neighbor[i]
                    + params.beta_eps * eps
            })
            .collect())
    }
}

/// Evaluates
/// `y_i = β_ind h_i t_i + β_sp z_i + β_xy u_i + β_xny u_N(i) + β_eps ε_i`.
/// `noise = None` gives the noiseless (expected) outcome.
pub fn outcome(
    params: &DgpParams,
    weights: &WeightBank,
    graph: &UndirectedGraph,
    x_tilde: &Tensor,
    t: &[u8],
    noise: Option<&[f64]>,
) -> Result<Vec<f64>> {
    StructuralTerms::new(weights, graph, x_tilde)?.outcomes(params, graph, t, noise)
}

pub(crate) fn sample_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed, "dgp/noise", 0);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

#[cfg(test)]
mod tests;
