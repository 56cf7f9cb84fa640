//! Synthetic graphs for tests and desk-scale experiments.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::graph::{Graph, NodeId};

/// Directed configuration model with independent power-law in- and
/// out-degree sequences.
///
/// Degrees are drawn as `ceil(x_min * U^(-1/(exponent-1)))` with `x_min` set
/// so the mean is close to `avg_degree`, capped at `n - 1`; out- and in-stubs
/// are then paired uniformly at random. Multi-edges collapse on build, so the
/// final edge count lands somewhat below `n * avg_degree`.
pub fn power_law_digraph(n: usize, avg_degree: f64, exponent: f64, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(invalid("power-law graph needs at least two nodes"));
    }
    if !(exponent > 2.0) {
        return Err(invalid(format!("exponent must exceed 2, got {exponent}")));
    }
    if !(avg_degree >= 1.0) {
        return Err(invalid(format!("average degree must be at least 1, got {avg_degree}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // continuous Pareto mean is x_min (gamma - 1) / (gamma - 2); rounding up adds ~1/2
    let x_min = ((avg_degree - 0.5) * (exponent - 2.0) / (exponent - 1.0)).max(0.5);
    let cap = (n - 1) as f64;
    let draw = |rng: &mut ChaCha8Rng| -> Vec<usize> {
        (0..n)
            .map(|_| {
                let u: f64 = 1.0 - rng.random::<f64>();
                (x_min * u.powf(-1.0 / (exponent - 1.0))).ceil().clamp(1.0, cap) as usize
            })
            .collect()
    };
    let out_deg = draw(&mut rng);
    let in_deg = draw(&mut rng);

    let mut out_stubs: Vec<NodeId> = stubs(&out_deg);
    let mut in_stubs: Vec<NodeId> = stubs(&in_deg);
    // balance stub counts by resampling the shorter side proportionally
    while out_stubs.len() < in_stubs.len() {
        let pick = out_stubs[rng.random_range(0..out_stubs.len())];
        out_stubs.push(pick);
    }
    while in_stubs.len() < out_stubs.len() {
        let pick = in_stubs[rng.random_range(0..in_stubs.len())];
        in_stubs.push(pick);
    }
    in_stubs.shuffle(&mut rng);
    Graph::from_edges(n, out_stubs.into_iter().zip(in_stubs))
}

fn stubs(degrees: &[usize]) -> Vec<NodeId> {
    degrees
        .iter()
        .enumerate()
        .flat_map(|(u, &d)| std::iter::repeat_n(u as NodeId, d))
        .collect()
}

/// Uniform random directed graph with `m` distinct edges (self-loops excluded).
pub fn random_digraph(n: usize, m: usize, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(invalid("random graph needs at least two nodes"));
    }
    if m > n * (n - 1) {
        return Err(invalid(format!("{m} edges do not fit in {n} nodes")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = rustc_hash::FxHashSet::default();
    while edges.len() < m {
        let u = rng.random_range(0..n as NodeId);
        let v = rng.random_range(0..n as NodeId);
        if u != v {
            edges.insert((u, v));
        }
    }
    let mut edges: Vec<_> = edges.into_iter().collect();
    edges.sort_unstable();
    Graph::from_edges(n, edges)
}

pub fn two_cycle() -> Graph {
    Graph::from_edges(2, [(0, 1), (1, 0)]).expect("fixture")
}

pub fn directed_cycle(n: usize) -> Graph {
    Graph::from_edges(n, (0..n as NodeId).map(|u| (u, (u + 1) % n as NodeId))).expect("fixture")
}

/// `leaves` nodes pointing at node 0; every node also has a self-loop.
pub fn in_star(leaves: usize) -> Graph {
    let n = leaves + 1;
    let edges = (1..n as NodeId).map(|u| (u, 0)).chain((0..n as NodeId).map(|u| (u, u)));
    Graph::from_edges(n, edges).expect("fixture")
}
