use rand::Rng;

use super::UndirectedGraph;
use crate::error::{Error, Result};
use crate::seed;

/// Barabási–Albert preferential attachment.
///
/// Starts from `m` isolated nodes. Node `m` links to all of them; every later
/// node links to `m` distinct existing nodes drawn with probability
/// proportional to their current degree. The result has `m * (n - m)` edges.
pub fn generate_ba(n: usize, m: usize, seed: u64) -> Result<UndirectedGraph> {
    if m < 1 {
        return Err(Error::param("m", "attachment parameter must be at least 1"));
    }
    if n <= m {
        return Err(Error::param("n", format!("need n > m, got n={n}, m={m}")));
    }
    let mut rng = seed::rng(seed, "graph/ba", 0);
    let mut graph = UndirectedGraph::empty(n);
    // Each node appears once per incident edge, so a uniform draw from this
    // list is a degree-proportional draw.
    let mut degree_list: Vec<usize> = Vec::with_capacity(2 * m * (n - m));
    let mut targets: Vec<usize> = (0..m).collect();
    let mut chosen = vec![false; n];

    for source in m..n {
        for &t in &targets {
            graph.insert_edge(source, t);
        }
        degree_list.extend_from_slice(&targets);
        degree_list.extend(std::iter::repeat(source).take(m));

        if source + 1 == n {
            break;
        }
        for &t in &targets {
            chosen[t] = false;
        }
        targets.clear();
        while targets.len() < m {
            let pick = degree_list[rng.random_range(0..degree_list.len())];
            if !chosen[pick] {
                chosen[pick] = true;
                targets.push(pick);
            }
        }
    }
    Ok(graph)
}
