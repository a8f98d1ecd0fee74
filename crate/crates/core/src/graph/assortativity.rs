use std::collections::HashMap;
use std::hash::Hash;

use super::UndirectedGraph;
use crate::error::{Error, Result};

/// Newman's assortativity coefficient for a categorical node attribute.
///
/// `M[a][b]` is the fraction of edge ends (both orientations of every edge)
/// joining category `a` to `b`; with `a_i` its row sums,
/// `r = (tr M - Σ a_i²) / (1 - Σ a_i²)`.
pub fn assortativity_categorical<L: Eq + Hash>(
    graph: &UndirectedGraph,
    labels: &[L],
) -> Result<f64> {
    check_len(graph, labels.len())?;
    if graph.edge_count() == 0 {
        return Err(Error::UndefinedStatistic(
            "assortativity of a graph without edges",
        ));
    }
    let mut index: HashMap<&L, usize> = HashMap::new();
    let cat: Vec<usize> = labels
        .iter()
        .map(|l| {
            let next = index.len();
            *index.entry(l).or_insert(next)
        })
        .collect();
    let k = index.len();

    let mut same = 0usize;
    let mut ends = vec![0usize; k];
    for (i, j) in graph.edges() {
        if cat[i] == cat[j] {
            same += 2;
        }
        ends[cat[i]] += 1;
        ends[cat[j]] += 1;
    }
    let total = 2.0 * graph.edge_count() as f64;
    let trace = same as f64 / total;
    let expected: f64 = ends.iter().map(|&e| (e as f64 / total).powi(2)).sum();
    let denom = 1.0 - expected;
    if denom.abs() < 1e-15 {
        return Err(Error::UndefinedStatistic(
            "categorical assortativity with every edge end in one category",
        ));
    }
    Ok((trace - expected) / denom)
}

/// Assortativity for a scalar node attribute: Pearson correlation of the
/// endpoint values over both orientations of every edge.
pub fn assortativity_numeric(graph: &UndirectedGraph, values: &[f64]) -> Result<f64> {
    check_len(graph, values.len())?;
    if graph.edge_count() == 0 {
        return Err(Error::UndefinedStatistic(
            "assortativity of a graph without edges",
        ));
    }
    // Both orientations make the two marginals identical, so one mean and one
    // variance (over edge ends) suffice.
    let edges = graph.edges();
    let ends = 2.0 * edges.len() as f64;
    let mean = edges
        .iter()
        .map(|&(i, j)| values[i] + values[j])
        .sum::<f64>()
        / ends;
    let mut var = 0.0;
    let mut cov = 0.0;
    for &(i, j) in &edges {
        let (a, b) = (values[i] - mean, values[j] - mean);
        var += a * a + b * b;
        cov += 2.0 * a * b;
    }
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::UndefinedStatistic(
            "numeric assortativity with zero variance over edge endpoints",
        ));
    }
    Ok((cov / var).clamp(-1.0, 1.0))
}

fn check_len(graph: &UndirectedGraph, len: usize) -> Result<()> {
    if len != graph.node_count() {
        return Err(Error::InvalidInput(format!(
            "{len} labels for {} nodes",
            graph.node_count()
        )));
    }
    Ok(())
}
