//! Seeded random-walk primitives.
//!
//! Walk lengths are geometric with `P[L = i] = alpha (1 - alpha)^i` on
//! `i >= 0`; each step moves to a uniform out-neighbor. Randomness comes from
//! [`RngStream`]s keyed by `(seed, stream)`, and large walk counts are split
//! into fixed-size batches with one stream per batch so results do not depend
//! on thread scheduling.

use std::collections::HashSet;
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{invalid, Error, Result};
use crate::graph::{Graph, NodeId, NodeMask};

/// Walks per rng stream when a query's walks are split into batches.
pub const WALK_BATCH: u64 = 1024;

/// Draws allowed for a single rejection-sampled step before giving up.
pub const REJECTION_LIMIT: u64 = 1_000_000;

const CALIBRATION_WALKS: u64 = 1000;

/// Deterministic random stream identified by a seed and a stream index.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Sampler for geometric walk lengths.
#[derive(Clone, Copy, Debug)]
pub struct WalkLength(Geometric);

impl WalkLength {
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Geometric::new(alpha)
            .map(WalkLength)
            .map_err(|e| invalid(format!("alpha {alpha}: {e}")))
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.0.sample(rng)
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

pub fn sample_geometric(alpha: f64, rng: &mut RngStream) -> Result<u64> {
    Ok(WalkLength::new(alpha)?.sample(rng))
}

/// Node-set membership as seen by a walk.
pub trait StopSet {
    fn contains_node(&self, u: NodeId) -> bool;
}

impl StopSet for NodeMask {
    #[inline]
    fn contains_node(&self, u: NodeId) -> bool {
        self.contains(u)
    }
}

impl StopSet for HashSet<NodeId> {
    fn contains_node(&self, u: NodeId) -> bool {
        self.contains(&u)
    }
}

impl StopSet for FxHashSet<NodeId> {
    fn contains_node(&self, u: NodeId) -> bool {
        self.contains(&u)
    }
}

impl StopSet for [NodeId] {
    fn contains_node(&self, u: NodeId) -> bool {
        self.contains(&u)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WalkOutcome {
    /// First walk position inside the stop set, if any.
    pub hit: Option<NodeId>,
    pub steps_taken: u64,
    pub sampled_length: u64,
}

#[inline]
pub fn step<R: Rng + ?Sized>(g: &Graph, u: NodeId, rng: &mut R) -> NodeId {
    let nbrs = g.out_neighbors(u);
    nbrs[rng.random_range(0..nbrs.len())]
}

/// Walks `V_0 = s, ..., V_L` and reports the first position in `stop`.
///
/// Position 0 is checked, so a start inside the stop set hits immediately.
pub fn walk_first_hit<S, R>(g: &Graph, s: NodeId, length: u64, stop: &S, rng: &mut R) -> WalkOutcome
where
    S: StopSet + ?Sized,
    R: Rng + ?Sized,
{
    let mut u = s;
    if stop.contains_node(u) {
        return WalkOutcome {
            hit: Some(u),
            steps_taken: 0,
            sampled_length: length,
        };
    }
    for i in 1..=length {
        u = step(g, u, rng);
        if stop.contains_node(u) {
            return WalkOutcome {
                hit: Some(u),
                steps_taken: i,
                sampled_length: length,
            };
        }
    }
    WalkOutcome {
        hit: None,
        steps_taken: length,
        sampled_length: length,
    }
}

/// Final node of a walk of the given length.
#[inline]
pub fn walk_endpoint<R: Rng + ?Sized>(g: &Graph, s: NodeId, length: u64, rng: &mut R) -> NodeId {
    let mut u = s;
    for _ in 0..length {
        u = step(g, u, rng);
    }
    u
}

/// Per-node quantities for target-avoiding walks: the fraction of
/// out-neighbors outside the target set, and the score
/// `(1/d_out(u)) * sum of estimates over out-neighbors inside it`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AvoidingInfo {
    pub p_bar: f64,
    pub score: f64,
}

pub trait AvoidingScores {
    fn info(&mut self, g: &Graph, u: NodeId) -> AvoidingInfo;
}

impl AvoidingScores for FxHashMap<NodeId, AvoidingInfo> {
    fn info(&mut self, _g: &Graph, u: NodeId) -> AvoidingInfo {
        self.get(&u).copied().unwrap_or(AvoidingInfo { p_bar: 1.0, score: 0.0 })
    }
}

/// Computes [`AvoidingInfo`] on first visit and memoizes it.
pub struct LazyScores<'a, F> {
    target: &'a NodeMask,
    estimate: F,
    memo: FxHashMap<NodeId, AvoidingInfo>,
}

impl<'a, F: Fn(NodeId) -> f64> LazyScores<'a, F> {
    /// `estimate(z)` is the inverse-PPR value used for target nodes `z`.
    pub fn new(target: &'a NodeMask, estimate: F) -> Self {
        LazyScores {
            target,
            estimate,
            memo: FxHashMap::default(),
        }
    }

    pub fn visited(&self) -> usize {
        self.memo.len()
    }
}

impl<F: Fn(NodeId) -> f64> AvoidingScores for LazyScores<'_, F> {
    fn info(&mut self, g: &Graph, u: NodeId) -> AvoidingInfo {
        if let Some(&info) = self.memo.get(&u) {
            return info;
        }
        let nbrs = g.out_neighbors(u);
        let mut outside = 0usize;
        let mut sum = 0.0;
        for &z in nbrs {
            if self.target.contains(z) {
                sum += (self.estimate)(z);
            } else {
                outside += 1;
            }
        }
        let d = nbrs.len() as f64;
        let info = AvoidingInfo {
            p_bar: outside as f64 / d,
            score: sum / d,
        };
        self.memo.insert(u, info);
        info
    }
}

/// One target-avoiding walk from `s`, scored by the bidirectional identity
///
/// `pi_s(t) = E[ sum_{i=0}^{L-1} (prod_{j<i} p_bar(V_j)) * S_T(V_i) ]`,
///
/// where each step picks a uniform out-neighbor outside the target set by
/// rejection sampling. The walk stops after `min(L, l_max)` terms, or right
/// after collecting the term of a node with `p_bar < p_min` (or `p_bar = 0`).
#[allow(clippy::too_many_arguments)]
pub fn target_avoiding_score<A, R>(
    g: &Graph,
    s: NodeId,
    length: u64,
    target: &NodeMask,
    scores: &mut A,
    p_min: f64,
    l_max: u64,
    rng: &mut R,
) -> Result<f64>
where
    A: AvoidingScores + ?Sized,
    R: Rng + ?Sized,
{
    if target.contains(s) {
        return Err(invalid(format!("walk source {s} lies in the target set")));
    }
    let terms = length.min(l_max);
    let mut u = s;
    let mut weight = 1.0;
    let mut total = 0.0;
    for i in 0..terms {
        let info = scores.info(g, u);
        total += weight * info.score;
        if info.p_bar <= 0.0 || info.p_bar < p_min || i + 1 == terms {
            break;
        }
        weight *= info.p_bar;
        u = avoiding_step(g, u, target, rng)?;
    }
    Ok(total)
}

fn avoiding_step<R: Rng + ?Sized>(g: &Graph, u: NodeId, target: &NodeMask, rng: &mut R) -> Result<NodeId> {
    let nbrs = g.out_neighbors(u);
    for _ in 0..REJECTION_LIMIT {
        let v = nbrs[rng.random_range(0..nbrs.len())];
        if !target.contains(v) {
            return Ok(v);
        }
    }
    Err(Error::RejectionLimit {
        node: u,
        limit: REJECTION_LIMIT,
    })
}

/// Runs `count` walks split into [`WALK_BATCH`]-sized batches, batch `b`
/// drawing from `RngStream::new(seed, b)`. Batch results come back in order.
pub fn run_batches<T, F>(count: u64, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut RngStream, u64) -> T + Sync,
{
    let batches = count.div_ceil(WALK_BATCH);
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = RngStream::new(seed, b);
            let n = WALK_BATCH.min(count - b * WALK_BATCH);
            f(&mut rng, n)
        })
        .collect()
}

/// Mean wall-clock seconds for one forward walk from a uniform start,
/// measured once per `(graph, alpha)` and cached on the graph.
pub fn mean_walk_seconds(g: &Graph, alpha: f64) -> Result<f64> {
    let lengths = WalkLength::new(alpha)?;
    Ok(g.cached_walk_time(alpha, || measure_walk_seconds(g, lengths, CALIBRATION_WALKS)))
}

fn measure_walk_seconds(g: &Graph, lengths: WalkLength, walks: u64) -> f64 {
    let mut rng = RngStream::new(0x7a1c_0b5e, 0);
    let empty = NodeMask::new(g.node_count());
    let n = g.node_count() as NodeId;
    let mut sink = 0u64;
    // warm the caches once so the first query is not charged for it
    for pass in 0..2 {
        let start = Instant::now();
        for _ in 0..walks {
            let s = rng.random_range(0..n);
            let len = lengths.sample(&mut rng);
            let out = walk_first_hit(g, s, len, &empty, &mut rng);
            sink = sink.wrapping_add(out.steps_taken);
        }
        if pass == 1 {
            std::hint::black_box(sink);
            return (start.elapsed().as_secs_f64() / walks as f64).max(1e-12);
        }
    }
    unreachable!()
}
