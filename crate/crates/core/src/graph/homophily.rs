use std::cmp::Ordering;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::UndirectedGraph;
use crate::error::{Error, Result};
use crate::seed;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomophilyParams {
    pub target_avg_degree: f64,
    /// Standard deviation of the Gaussian noise added to each pair's cosine score.
    pub noise_sd: f64,
}

impl Default for HomophilyParams {
    fn default() -> Self {
        Self {
            target_avg_degree: 4.0,
            noise_sd: 0.05,
        }
    }
}

struct ScoredPair {
    score: f64,
    a: u32,
    b: u32,
}

fn rank(x: &ScoredPair, y: &ScoredPair) -> Ordering {
    y.score
        .total_cmp(&x.score)
        .then_with(|| (x.a, x.b).cmp(&(y.a, y.b)))
}

/// Links the most similar node pairs until the requested average degree is
/// reached.
///
/// Every pair `(i, j)`, `i < j`, is scored by the cosine similarity of its
/// feature rows plus independent `N(0, noise_sd²)` noise. Pairs are ranked by
/// score (ties by pair index) and the top `ceil(target_avg_degree * n / 2)`
/// become edges. Isolated nodes are allowed.
pub fn generate_homophily(
    features: &Tensor,
    params: HomophilyParams,
    seed: u64,
) -> Result<UndirectedGraph> {
    let (n, d) = features.shape();
    if n < 2 {
        return Err(Error::param("n", "homophily graph needs at least 2 nodes"));
    }
    if d < 1 {
        return Err(Error::param("d", "feature dimension must be at least 1"));
    }
    if !(params.target_avg_degree > 0.0 && params.target_avg_degree.is_finite()) {
        return Err(Error::param(
            "target_avg_degree",
            "must be positive and finite",
        ));
    }
    if !(params.noise_sd >= 0.0 && params.noise_sd.is_finite()) {
        return Err(Error::param("noise_sd", "must be non-negative and finite"));
    }
    if n > u32::MAX as usize {
        return Err(Error::param("n", "too many nodes"));
    }

    let mut unit = features.clone();
    for i in 0..n {
        let row = unit.row_mut(i);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidInput(format!(
                "feature row {i} has zero or non-finite norm; cosine similarity undefined"
            )));
        }
        row.iter_mut().for_each(|v| *v /= norm);
    }

    let total_pairs = n * (n - 1) / 2;
    let wanted = ((params.target_avg_degree * n as f64 / 2.0).ceil() as usize).min(total_pairs);

    let mut rng = seed::rng(seed, "graph/homophily", 0);
    let mut pairs = Vec::with_capacity(total_pairs);
    for a in 0..n {
        let ra = unit.row(a);
        for b in a + 1..n {
            let cosine: f64 = ra.iter().zip(unit.row(b)).map(|(x, y)| x * y).sum();
            let noise = if params.noise_sd > 0.0 {
                let z: f64 = StandardNormal.sample(&mut rng);
                params.noise_sd * z
            } else {
                0.0
            };
            pairs.push(ScoredPair {
                score: cosine + noise,
                a: a as u32,
                b: b as u32,
            });
        }
    }

    if wanted == 0 {
        return Ok(UndirectedGraph::empty(n));
    }
    if wanted < pairs.len() {
        pairs.select_nth_unstable_by(wanted - 1, rank);
        pairs.truncate(wanted);
    }
    pairs.sort_unstable_by(rank);

    let mut graph = UndirectedGraph::empty(n);
    for p in &pairs {
        graph.insert_edge(p.a as usize, p.b as usize);
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(avg: f64, sd: f64) -> HomophilyParams {
        HomophilyParams {
            target_avg_degree: avg,
            noise_sd: sd,
        }
    }

    #[test]
    fn single_edge_joins_identical_rows() {
        let x = Tensor::from_vec(3, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        // ceil(2/3 * 3 / 2) = 1 edge
        let g = generate_homophily(&x, params(2.0 / 3.0, 0.0), 0).unwrap();
        assert_eq!(g.edges(), vec![(0, 2)]);
    }

    #[test]
    fn ties_break_by_pair_index() {
        let x = Tensor::from_vec(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let g = generate_homophily(&x, params(2.0 / 3.0, 0.0), 0).unwrap();
        assert_eq!(g.edges(), vec![(0, 1)]);
    }

    #[test]
    fn zero_row_is_rejected() {
        let x = Tensor::from_vec(2, 2, vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            generate_homophily(&x, params(1.0, 0.0), 0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn hits_target_edge_count_and_is_deterministic() {
        let mut rng = seed::rng(3, "test", 0);
        let data: Vec<f64> = (0..200 * 5)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let x = Tensor::from_vec(200, 5, data).unwrap();
        let g = generate_homophily(&x, HomophilyParams::default(), 11).unwrap();
        assert_eq!(g.edge_count(), 400);
        g.validate().unwrap();
        assert_eq!(
            g,
            generate_homophily(&x, HomophilyParams::default(), 11).unwrap()
        );
        let quiet = params(4.0, 0.0);
        assert_eq!(
            generate_homophily(&x, quiet, 1).unwrap(),
            generate_homophily(&x, quiet, 2).unwrap()
        );
    }
}
