//! Ground-truth PPR computations and the precomputed frontier store.
//!
//! Three independent routes are provided so they can check each other:
//! power iteration on the forward recurrence, the reverse push run to a tiny
//! threshold, and exact enumeration of walk distributions step by step.

mod store;

pub use store::{precompute_frontiers, query_with_store, FrontierRecord, FrontierStore};

use crate::error::{invalid, Error, Result};
use crate::frontier::reverse_push;
use crate::graph::{Graph, NodeId};
use crate::walks::check_alpha;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `pi_s(v)` over all `v`.
    Forward,
    /// `pi_w(t)` over all `w`.
    Inverse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PprVector {
    pub node: NodeId,
    pub direction: Direction,
    pub values: Vec<f64>,
    /// Entrywise additive error bound.
    pub tolerance: f64,
}

impl PprVector {
    pub fn get(&self, u: NodeId) -> f64 {
        self.values[u as usize]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("tolerance must be positive, got {tol}")))
    }
}

/// `next = alpha * teleport + (1 - alpha) * current * W`, with `W` the
/// random-walk transition matrix.
fn forward_iterate(g: &Graph, alpha: f64, tol: f64, teleport: impl Fn(&mut [f64])) -> Vec<f64> {
    let n = g.node_count();
    let mut current = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    loop {
        teleport(&mut next);
        for u in g.nodes() {
            let share = (1.0 - alpha) * current[u as usize] / g.out_degree(u) as f64;
            for &v in g.out_neighbors(u) {
                next[v as usize] += share;
            }
        }
        let change: f64 = current.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut current, &mut next);
        // L1 contraction by (1 - alpha): the remaining error is below
        // change * (1 - alpha) / alpha.
        if change < tol * alpha {
            return current;
        }
    }
}

/// Personalized PageRank from `s` by power iteration, to L1 error below `tol`.
pub fn power_iteration_ppr(g: &Graph, s: NodeId, alpha: f64, tol: f64) -> Result<PprVector> {
    g.check_node(s)?;
    check_alpha(alpha)?;
    check_tol(tol)?;
    let values = forward_iterate(g, alpha, tol, |next| {
        next.fill(0.0);
        next[s as usize] = alpha;
    });
    Ok(PprVector {
        node: s,
        direction: Direction::Forward,
        values,
        tolerance: tol,
    })
}

/// Global PageRank with uniform teleport.
pub fn global_pagerank(g: &Graph, alpha: f64, tol: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    check_tol(tol)?;
    let base = alpha / g.node_count() as f64;
    Ok(forward_iterate(g, alpha, tol, |next| next.fill(base)))
}

/// Inverse PPR vector `w -> pi_w(t)` from the reverse push run to residual
/// threshold `alpha * tol`.
pub fn exact_inverse_ppr(g: &Graph, t: NodeId, alpha: f64, tol: f64) -> Result<PprVector> {
    check_tol(tol)?;
    let state = reverse_push(g, t, alpha, alpha * tol)?;
    let mut values = vec![0.0; g.node_count()];
    for (&u, &p) in &state.estimates {
        values[u as usize] = p;
    }
    Ok(PprVector {
        node: t,
        direction: Direction::Inverse,
        values,
        tolerance: tol,
    })
}

/// Inverse PPR by fixed-point iteration of `x = alpha e_t + (1 - alpha) P x`,
/// where `(P x)(u)` averages `x` over the out-neighbors of `u`.
///
/// Shares no code with the push loop; used to check it.
pub fn inverse_power_iteration(g: &Graph, t: NodeId, alpha: f64, tol: f64) -> Result<PprVector> {
    g.check_node(t)?;
    check_alpha(alpha)?;
    check_tol(tol)?;
    let n = g.node_count();
    let mut current = vec![0.0; n];
    let mut next = vec![0.0; n];
    loop {
        for u in g.nodes() {
            let nbrs = g.out_neighbors(u);
            let mean = nbrs.iter().map(|&v| current[v as usize]).sum::<f64>() / nbrs.len() as f64;
            next[u as usize] = (1.0 - alpha) * mean + if u == t { alpha } else { 0.0 };
        }
        let change = current
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut current, &mut next);
        // sup-norm contraction by (1 - alpha)
        if change < tol * alpha {
            return Ok(PprVector {
                node: t,
                direction: Direction::Inverse,
                values: current,
                tolerance: tol,
            });
        }
    }
}

/// `sum_{i=0}^{l_cap} alpha (1 - alpha)^i * (distribution after i steps from s)`.
///
/// The dropped tail has mass `(1 - alpha)^(l_cap + 1)`, which must be below `tol`.
pub fn brute_force_walk_enum(g: &Graph, s: NodeId, alpha: f64, l_cap: usize, tol: f64) -> Result<PprVector> {
    g.check_node(s)?;
    check_alpha(alpha)?;
    let tail = (1.0 - alpha).powi(l_cap as i32 + 1);
    if !(tail < tol) {
        return Err(Error::TruncationTooLarge {
            l_cap,
            achievable: tail,
            requested: tol,
        });
    }
    let n = g.node_count();
    let mut dist = vec![0.0; n];
    dist[s as usize] = 1.0;
    let mut values = vec![0.0; n];
    let mut weight = alpha;
    for i in 0..=l_cap {
        for (acc, p) in values.iter_mut().zip(&dist) {
            *acc += weight * p;
        }
        if i == l_cap {
            break;
        }
        let mut moved = vec![0.0; n];
        for u in g.nodes() {
            let p = dist[u as usize];
            if p == 0.0 {
                continue;
            }
            let share = p / g.out_degree(u) as f64;
            for &v in g.out_neighbors(u) {
                moved[v as usize] += share;
            }
        }
        dist = moved;
        weight *= 1.0 - alpha;
    }
    Ok(PprVector {
        node: s,
        direction: Direction::Forward,
        values,
        tolerance: tail,
    })
}
