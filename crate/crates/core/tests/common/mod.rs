#![allow(dead_code)]

use netcausal::graph::UndirectedGraph;
use netcausal::model::{LossSpec, Model};
use netcausal::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small fixed graph with a hub, a chain, a triangle and an isolated node.
pub fn small_graph() -> UndirectedGraph {
    let edges = [
        (0, 1),
        (0, 2),
        (0, 3),
        (0, 4),
        (4, 5),
        (5, 6),
        (6, 7),
        (7, 8),
        (8, 9),
        (9, 7),
        (1, 10),
    ];
    UndirectedGraph::from_edges(12, &edges).unwrap()
}

pub struct Fixture {
    pub graph: UndirectedGraph,
    pub x: Tensor,
    pub t: Vec<u8>,
    pub y: Vec<f64>,
}

pub fn fixture(d: usize, seed: u64) -> Fixture {
    let graph = small_graph();
    let n = graph.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Tensor::from_vec(
        n,
        d,
        (0..n * d).map(|_| rng.random_range(-1.5..1.5)).collect(),
    )
    .unwrap();
    let t = (0..n).map(|i| (i % 3 == 0) as u8).collect();
    let y = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    Fixture { graph, x, t, y }
}

/// Central differences for every scalar of every parameter, compared
/// against the analytic gradient of `spec`. Returns per-tensor
/// `(name, worst relative error)`.
///
/// With gradient reversal active, parameters below the reversal (the
/// encoder) descend `L_y - α L_t` while every other parameter descends
/// `L_y + α L_t`, so the reference objective is chosen per parameter.
pub fn gradient_check(
    model: &mut Model,
    f: &Fixture,
    spec: &LossSpec,
    step: f64,
) -> Vec<(String, f64)> {
    let (_, analytic) = model
        .loss_and_gradients(&f.graph, &f.x, &f.t, &f.y, spec)
        .unwrap();
    let mut out = Vec::new();
    for (k, grad) in analytic.iter().enumerate() {
        let name = model.params().get(k).name.clone();
        let below_reversal = spec.reverse_gradients && name.starts_with("encoder.");
        let reference = LossSpec {
            alpha: if below_reversal {
                -spec.alpha
            } else {
                spec.alpha
            },
            reverse_gradients: false,
            ..*spec
        };
        let mut worst = 0.0f64;
        for idx in 0..grad.len() {
            let orig = model.params().get(k).value.data()[idx];
            let mut eval = |v: f64| {
                model
                    .params_mut()
                    .iter_mut()
                    .nth(k)
                    .unwrap()
                    .value
                    .data_mut()[idx] = v;
                model.loss(&f.graph, &f.x, &f.t, &f.y, &reference).unwrap()
            };
            let plus = eval(orig + step);
            let minus = eval(orig - step);
            eval(orig);
            let numeric = (plus - minus) / (2.0 * step);
            let a = grad.data()[idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
        out.push((name, worst));
    }
    out
}
