//! Undirected interference topology, random-graph generators and
//! assortativity statistics.

mod assortativity;
mod ba;
mod homophily;

pub use assortativity::{assortativity_categorical, assortativity_numeric};
pub use ba::generate_ba;
pub use homophily::{generate_homophily, HomophilyParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Simple undirected graph over nodes `0..node_count`.
///
/// Neighbor lists are sorted and duplicate-free, self-loops are rejected and
/// every edge is stored in both endpoint lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    adjacency: Vec<Vec<usize>>,
    edge_count: usize,
}

impl UndirectedGraph {
    pub fn empty(node_count: usize) -> Self {
        Self {
            adjacency: vec![Vec::new(); node_count],
            edge_count: 0,
        }
    }

    /// Builds a graph from an edge list. Duplicate edges (in either
    /// orientation) collapse to one; self-loops and out-of-range endpoints
    /// are errors.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); node_count];
        for &(a, b) in edges {
            if a >= node_count || b >= node_count {
                return Err(Error::InvalidInput(format!(
                    "edge ({a}, {b}) out of range for {node_count} nodes"
                )));
            }
            if a == b {
                return Err(Error::InvalidInput(format!("self-loop on node {a}")));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        let edge_count = adjacency.iter().map(Vec::len).sum::<usize>() / 2;
        Ok(Self {
            adjacency,
            edge_count,
        })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.node_count() && self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Inserts edge `{a, b}`; returns false when it already exists.
    pub(crate) fn insert_edge(&mut self, a: usize, b: usize) -> bool {
        debug_assert!(a != b);
        match self.adjacency[a].binary_search(&b) {
            Ok(_) => false,
            Err(pos) => {
                self.adjacency[a].insert(pos, b);
                let pos_b = self.adjacency[b].binary_search(&a).unwrap_err();
                self.adjacency[b].insert(pos_b, a);
                self.edge_count += 1;
                true
            }
        }
    }

    /// Edges as `(i, j)` pairs with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for (i, list) in self.adjacency.iter().enumerate() {
            out.extend(list.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn mean_degree(&self) -> f64 {
        if self.adjacency.is_empty() {
            return 0.0;
        }
        2.0 * self.edge_count as f64 / self.node_count() as f64
    }

    /// Returns a copy with one extra isolated node appended.
    pub fn with_isolated_node(&self) -> Self {
        let mut g = self.clone();
        g.adjacency.push(Vec::new());
        g
    }

    /// Checks every structural invariant; used by decoders and tests.
    pub fn validate(&self) -> Result<()> {
        let mut half_degree_sum = 0usize;
        for (i, list) in self.adjacency.iter().enumerate() {
            half_degree_sum += list.len();
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidInput(format!(
                    "neighbors of {i} not sorted and unique"
                )));
            }
            for &j in list {
                if j == i {
                    return Err(Error::InvalidInput(format!("self-loop on node {i}")));
                }
                if j >= self.node_count() || self.adjacency[j].binary_search(&i).is_err() {
                    return Err(Error::InvalidInput(format!("asymmetric edge ({i}, {j})")));
                }
            }
        }
        if half_degree_sum != 2 * self.edge_count {
            return Err(Error::InvalidInput(
                "edge count disagrees with adjacency".into(),
            ));
        }
        Ok(())
    }
}

/// Which generator produced a split's graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Ba,
    Homophily,
}

impl std::str::FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ba" => Ok(GraphKind::Ba),
            "homophily" => Ok(GraphKind::Homophily),
            other => Err(Error::param(
                "graph_kind",
                format!("unknown kind `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for GraphKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GraphKind::Ba => "ba",
            GraphKind::Homophily => "homophily",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_edges_normalizes() {
        let g = UndirectedGraph::from_edges(4, &[(1, 0), (0, 1), (2, 3)]).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.edges(), vec![(0, 1), (2, 3)]);
        g.validate().unwrap();
    }

    #[test]
    fn rejects_self_loops_and_out_of_range() {
        assert!(UndirectedGraph::from_edges(3, &[(1, 1)]).is_err());
        assert!(UndirectedGraph::from_edges(3, &[(0, 3)]).is_err());
    }

    #[test]
    fn insert_edge_keeps_invariants() {
        let mut g = UndirectedGraph::empty(5);
        assert!(g.insert_edge(3, 1));
        assert!(g.insert_edge(1, 4));
        assert!(!g.insert_edge(1, 3));
        assert_eq!(g.neighbors(1), &[3, 4]);
        assert_eq!(g.edge_count(), 2);
        g.validate().unwrap();
    }
}
