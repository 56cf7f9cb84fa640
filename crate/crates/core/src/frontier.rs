//! Reverse local push around a target node.
//!
//! The push loop maintains an estimate vector `p` and a residual vector `r`
//! with `p(t) = r(t) = alpha` initially. Pushing residual from `w` adds
//! `(1 - alpha) r(w) / d_out(u)` to both `p(u)` and `r(u)` for every
//! in-neighbor `u`, then clears `r(w)`. Throughout,
//!
//! `pi_w(t) = p(w) - r(w) + sum_u r(u) pi_w(u) / alpha`,
//!
//! so the estimates only ever underestimate, by at most `max r / alpha`.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{invalid, Result};
use crate::graph::{Graph, NodeId, NodeMask};
use crate::walks::check_alpha;

/// Estimate and residual vectors of a finished push loop.
#[derive(Debug, Clone, Default)]
pub struct PushState {
    pub estimates: FxHashMap<NodeId, f64>,
    pub residuals: FxHashMap<NodeId, f64>,
    pub pushes: u64,
}

impl PushState {
    fn seeded(t: NodeId, alpha: f64) -> Self {
        let mut state = PushState::default();
        state.estimates.insert(t, alpha);
        state.residuals.insert(t, alpha);
        state
    }

    pub fn estimate(&self, w: NodeId) -> f64 {
        self.estimates.get(&w).copied().unwrap_or(0.0)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.values().copied().fold(0.0, f64::max)
    }

    /// Pushes the residual of `w`, calling `touched(u, r(u))` for every
    /// in-neighbor whose residual grew.
    fn push(&mut self, g: &Graph, alpha: f64, w: NodeId, mut touched: impl FnMut(NodeId, f64)) {
        // Captured and cleared first so self-loop mass lands back in r(w).
        let r = match self.residuals.get_mut(&w) {
            Some(r) => std::mem::replace(r, 0.0),
            None => return,
        };
        if r <= 0.0 {
            return;
        }
        self.pushes += 1;
        let mass = (1.0 - alpha) * r;
        for &u in g.in_neighbors(w) {
            let delta = mass / g.out_degree(u) as f64;
            // Subnormal mass can round back up to itself and never drain.
            if delta < f64::MIN_POSITIVE {
                continue;
            }
            *self.estimates.entry(u).or_insert(0.0) += delta;
            let ru = self.residuals.entry(u).or_insert(0.0);
            *ru += delta;
            touched(u, *ru);
        }
    }
}

/// Pushes in FIFO order until every residual is at most `threshold`.
pub fn reverse_push(g: &Graph, t: NodeId, alpha: f64, threshold: f64) -> Result<PushState> {
    g.check_node(t)?;
    check_alpha(alpha)?;
    if !(threshold > 0.0) {
        return Err(invalid(format!("push threshold must be positive, got {threshold}")));
    }
    let mut state = PushState::seeded(t, alpha);
    let mut queue = VecDeque::new();
    let mut queued = FxHashSet::default();
    if alpha > threshold {
        queue.push_back(t);
        queued.insert(t);
    }
    while let Some(w) = queue.pop_front() {
        queued.remove(&w);
        state.push(g, alpha, w, |u, ru| {
            if ru > threshold && queued.insert(u) {
                queue.push_back(u);
            }
        });
    }
    Ok(state)
}

/// Target set, frontier, and inverse-PPR estimates around one target.
#[derive(Debug, Clone)]
pub struct FrontierResult {
    pub target: NodeId,
    pub alpha: f64,
    pub beta: f64,
    /// Effective reverse threshold.
    pub eps_r: f64,
    /// Additive error bound, `beta * eps_r`.
    pub eps_inv: f64,
    /// Sorted; always contains the target.
    pub target_set: Vec<NodeId>,
    /// Sorted in-neighbors of the target set that are not in it.
    pub frontier_set: Vec<NodeId>,
    /// Every node touched by the push loop, including those outside both sets.
    pub estimates: FxHashMap<NodeId, f64>,
    pub residuals: FxHashMap<NodeId, f64>,
    pub push_count: u64,
    pub reverse_time: Duration,
}

impl FrontierResult {
    fn assemble(
        g: &Graph,
        t: NodeId,
        alpha: f64,
        beta: f64,
        eps_r: f64,
        state: PushState,
        reverse_time: Duration,
    ) -> Self {
        let mut target_set: Vec<NodeId> = state
            .estimates
            .iter()
            .filter(|&(&u, &p)| u == t || p > eps_r)
            .map(|(&u, _)| u)
            .collect();
        target_set.sort_unstable();
        let in_target = |u: NodeId| target_set.binary_search(&u).is_ok();
        let mut frontier_set: Vec<NodeId> = target_set
            .iter()
            .flat_map(|&w| g.in_neighbors(w).iter().copied())
            .filter(|&u| !in_target(u))
            .collect();
        frontier_set.sort_unstable();
        frontier_set.dedup();
        FrontierResult {
            target: t,
            alpha,
            beta,
            eps_r,
            eps_inv: beta * eps_r,
            target_set,
            frontier_set,
            estimates: state.estimates,
            residuals: state.residuals,
            push_count: state.pushes,
            reverse_time,
        }
    }

    pub fn estimate(&self, w: NodeId) -> f64 {
        self.estimates.get(&w).copied().unwrap_or(0.0)
    }

    pub fn in_target_set(&self, w: NodeId) -> bool {
        self.target_set.binary_search(&w).is_ok()
    }

    pub fn in_frontier(&self, w: NodeId) -> bool {
        self.frontier_set.binary_search(&w).is_ok()
    }

    pub fn target_mask(&self, n: usize) -> NodeMask {
        NodeMask::from_nodes(n, self.target_set.iter().copied())
    }

    pub fn frontier_mask(&self, n: usize) -> NodeMask {
        NodeMask::from_nodes(n, self.frontier_set.iter().copied())
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.values().copied().fold(0.0, f64::max)
    }
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 0.5 {
        Ok(())
    } else {
        Err(invalid(format!("beta must lie in (0, 1/2), got {beta}")))
    }
}

/// Fixed-threshold frontier computation.
///
/// Pushes until every residual is at most `alpha * beta * eps_r`, which makes
/// every estimate an underestimate by less than `beta * eps_r`.
pub fn frontier_push(g: &Graph, t: NodeId, eps_r: f64, beta: f64, alpha: f64) -> Result<FrontierResult> {
    check_alpha(alpha)?;
    check_beta(beta)?;
    if !(eps_r > 0.0 && eps_r <= 1.0) {
        return Err(invalid(format!("eps_r must lie in (0, 1], got {eps_r}")));
    }
    let start = Instant::now();
    let state = reverse_push(g, t, alpha, alpha * beta * eps_r)?;
    let elapsed = start.elapsed();
    Ok(FrontierResult::assemble(g, t, alpha, beta, eps_r, state, elapsed))
}

/// Settings for the time-balanced frontier.
#[derive(Debug, Clone, Copy)]
pub struct BalanceParams {
    pub delta: f64,
    /// Walk-count multiplier: `k = c * eps_r / delta`.
    pub c: f64,
    pub beta: f64,
    pub alpha: f64,
    /// Seconds needed to generate one forward walk.
    pub walk_seconds: f64,
}

impl BalanceParams {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        check_beta(self.beta)?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.c > 0.0) {
            return Err(invalid(format!("walk multiplier c must be positive, got {}", self.c)));
        }
        if !(self.walk_seconds > 0.0) {
            return Err(invalid(format!(
                "walk time must be positive, got {}",
                self.walk_seconds
            )));
        }
        Ok(())
    }

    /// Predicted seconds of forward work at reverse threshold `eps_r`.
    pub fn forward_seconds(&self, eps_r: f64) -> f64 {
        if eps_r <= 0.0 {
            return 0.0;
        }
        self.walk_seconds * self.c * eps_r / self.delta
    }
}

/// Max-heap of residuals keyed by node, with in-place increase.
///
/// Ties go to the larger node id.
struct ResidualHeap {
    entries: Vec<(f64, NodeId)>,
    /// Slot of each node in `entries`, or `u32::MAX`.
    slot: Vec<u32>,
}

impl ResidualHeap {
    fn new(n: usize) -> Self {
        ResidualHeap {
            entries: Vec::new(),
            slot: vec![u32::MAX; n],
        }
    }

    fn above(a: (f64, NodeId), b: (f64, NodeId)) -> bool {
        a.0 > b.0 || (a.0 == b.0 && a.1 > b.1)
    }

    /// Sets the key of `u`, which may only grow while `u` is queued.
    fn raise(&mut self, u: NodeId, r: f64) {
        let i = match self.slot[u as usize] {
            u32::MAX => {
                self.entries.push((r, u));
                self.entries.len() - 1
            }
            i => {
                self.entries[i as usize].0 = r;
                i as usize
            }
        };
        self.sift_up(i);
    }

    fn pop(&mut self) -> Option<NodeId> {
        let last = self.entries.pop()?;
        let top = if self.entries.is_empty() {
            last
        } else {
            let top = std::mem::replace(&mut self.entries[0], last);
            self.sift_down(0);
            top
        };
        self.slot[top.1 as usize] = u32::MAX;
        Some(top.1)
    }

    fn max_key(&self) -> f64 {
        self.entries.first().map_or(0.0, |e| e.0)
    }

    fn sift_up(&mut self, mut i: usize) {
        let e = self.entries[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            if !Self::above(e, self.entries[parent]) {
                break;
            }
            self.entries[i] = self.entries[parent];
            self.slot[self.entries[i].1 as usize] = i as u32;
            i = parent;
        }
        self.entries[i] = e;
        self.slot[e.1 as usize] = i as u32;
    }

    fn sift_down(&mut self, mut i: usize) {
        let e = self.entries[i];
        let n = self.entries.len();
        loop {
            let mut child = 2 * i + 1;
            if child >= n {
                break;
            }
            if child + 1 < n && Self::above(self.entries[child + 1], self.entries[child]) {
                child += 1;
            }
            if !Self::above(self.entries[child], e) {
                break;
            }
            self.entries[i] = self.entries[child];
            self.slot[self.entries[i].1 as usize] = i as u32;
            i = child;
        }
        self.entries[i] = e;
        self.slot[e.1 as usize] = i as u32;
    }
}

/// Frontier computation that stops once the time already spent pushing
/// reaches the predicted forward-walk time at the current threshold.
///
/// Always pushes the node of largest residual; after each push the reverse
/// threshold becomes `max r / (alpha * beta)`.
pub fn balanced_frontier(g: &Graph, t: NodeId, params: &BalanceParams) -> Result<FrontierResult> {
    params.validate()?;
    g.check_node(t)?;
    let BalanceParams { alpha, beta, .. } = *params;
    let start = Instant::now();
    let mut state = PushState::seeded(t, alpha);
    let mut heap = ResidualHeap::new(g.node_count());
    heap.raise(t, alpha);
    let mut eps_r = 1.0 / beta;

    loop {
        let spent = start.elapsed().as_secs_f64();
        // NaN (infinite walk time with nothing left to push) keeps going
        // until the heap runs dry.
        if spent >= params.forward_seconds(eps_r) {
            break;
        }
        let Some(w) = heap.pop() else {
            eps_r = 0.0;
            break;
        };
        state.push(g, alpha, w, |u, ru| heap.raise(u, ru));
        eps_r = heap.max_key() / (alpha * beta);
    }
    let elapsed = start.elapsed();
    Ok(FrontierResult::assemble(g, t, alpha, beta, eps_r, state, elapsed))
}
