//! End-to-end PPR estimators and the Detect-High classifier.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::error::{invalid, Result};
use crate::frontier::{balanced_frontier, check_beta, frontier_push, reverse_push, BalanceParams};
use crate::graph::{Graph, NodeId, NodeMask};
use crate::oracle::FrontierRecord;
use crate::walks::{
    check_alpha, mean_walk_seconds, run_batches, target_avoiding_score, walk_endpoint, walk_first_hit, LazyScores,
    WalkLength,
};

pub const DEFAULT_ALPHA: f64 = 0.2;
pub const DEFAULT_C: f64 = 350.0;
pub const DEFAULT_BETA: f64 = 1.0 / 6.0;
pub const DEFAULT_C_MC: f64 = 35.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryParams {
    pub alpha: f64,
    pub delta: f64,
    /// Reverse threshold; `None` means `sqrt(d * delta)`.
    pub eps_r: Option<f64>,
    /// Walk multiplier for the bidirectional estimators.
    pub c: f64,
    pub beta: f64,
    /// Walk multiplier for Monte-Carlo.
    pub c_mc: f64,
    pub seed: u64,
}

impl QueryParams {
    pub fn new(delta: f64) -> Self {
        QueryParams {
            alpha: DEFAULT_ALPHA,
            delta,
            eps_r: None,
            c: DEFAULT_C,
            beta: DEFAULT_BETA,
            c_mc: DEFAULT_C_MC,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_eps_r(mut self, eps_r: f64) -> Self {
        self.eps_r = Some(eps_r);
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        check_beta(self.beta)?;
        check_delta(self.delta)?;
        if !(self.c >= 1.0) {
            return Err(invalid(format!("c must be at least 1, got {}", self.c)));
        }
        if !(self.c_mc >= 1.0) {
            return Err(invalid(format!("c_mc must be at least 1, got {}", self.c_mc)));
        }
        if let Some(e) = self.eps_r {
            if !(e > 0.0 && e <= 1.0) {
                return Err(invalid(format!("eps_r must lie in (0, 1], got {e}")));
            }
        }
        Ok(())
    }

    /// The explicit reverse threshold, or `sqrt(d * delta)` capped at 1.
    pub fn resolved_eps_r(&self, g: &Graph) -> f64 {
        self.eps_r
            .unwrap_or_else(|| (g.average_degree() * self.delta).sqrt().min(1.0))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// Inputs of the relative-error estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoreticalParams {
    /// Target relative error, in (0, 1).
    pub c_rel: f64,
    pub p_fail: f64,
}

/// Internal settings derived from [`TheoreticalParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoreticalDerived {
    pub eps_f: f64,
    pub beta: f64,
    pub p_min: f64,
    pub l_max: u64,
    pub n_f: u64,
}

impl TheoreticalParams {
    pub fn derive(&self, delta: f64, eps_r: f64, alpha: f64) -> Result<TheoreticalDerived> {
        let c = self.c_rel;
        if !(c > 0.0 && c < 1.0) {
            return Err(invalid(format!("relative error must lie in (0, 1), got {c}")));
        }
        if !(self.p_fail > 0.0 && self.p_fail < 1.0) {
            return Err(invalid(format!("p_fail must lie in (0, 1), got {}", self.p_fail)));
        }
        check_alpha(alpha)?;
        check_delta(delta)?;
        if !(eps_r > 0.0 && eps_r <= 1.0) {
            return Err(invalid(format!("eps_r must lie in (0, 1], got {eps_r}")));
        }
        let eps_f = delta / eps_r;
        let beta = c / (3.0 + c);
        let p_min = c / (3.0 * (1.0 + beta));
        let l_max = ((c * delta / 3.0).ln() / (1.0 - alpha).ln()).ceil().max(1.0) as u64;
        let n_f = ((45.0 * l_max as f64 / (c * c * eps_f)) * (2.0 / self.p_fail).ln()).ceil() as u64;
        Ok(TheoreticalDerived {
            eps_f,
            beta,
            p_min,
            l_max,
            n_f,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    FastPpr,
    BalancedFastPpr,
    TheoreticalFastPpr,
    MonteCarlo,
    LocalUpdate,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::FastPpr,
        Algorithm::BalancedFastPpr,
        Algorithm::TheoreticalFastPpr,
        Algorithm::MonteCarlo,
        Algorithm::LocalUpdate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::FastPpr => "fastppr",
            Algorithm::BalancedFastPpr => "balanced",
            Algorithm::TheoreticalFastPpr => "theoretical",
            Algorithm::MonteCarlo => "montecarlo",
            Algorithm::LocalUpdate => "localupdate",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub algorithm: Algorithm,
    pub walks_used: u64,
    pub frontier_pushes: u64,
    pub forward_time: Duration,
    pub reverse_time: Duration,
    /// The source was in the target set and its inverse estimate was returned directly.
    pub shortcut: bool,
    /// Reverse threshold used, for the frontier-based estimators.
    pub eps_r: Option<f64>,
}

impl Estimate {
    pub fn total_time(&self) -> Duration {
        self.forward_time + self.reverse_time
    }

    /// Equality on everything except timings.
    pub fn same_result(&self, other: &Estimate) -> bool {
        self.value.to_bits() == other.value.to_bits()
            && self.algorithm == other.algorithm
            && self.walks_used == other.walks_used
            && self.frontier_pushes == other.frontier_pushes
            && self.shortcut == other.shortcut
            && self.eps_r.map(f64::to_bits) == other.eps_r.map(f64::to_bits)
    }
}

fn check_pair(g: &Graph, s: NodeId, t: NodeId) -> Result<()> {
    g.check_node(s)?;
    g.check_node(t)
}

/// `ceil(c * eps_r / delta)`, at least one.
pub fn walk_count(c: f64, eps_r: f64, delta: f64) -> u64 {
    (c * eps_r / delta).ceil().max(1.0) as u64
}

pub(crate) struct ForwardOutcome {
    pub value: f64,
    pub walks: u64,
    pub shortcut: bool,
    pub elapsed: Duration,
}

/// Forward phase shared by every frontier-based estimator: return the
/// target-set estimate of `s` directly, or average the frontier estimate of
/// the first frontier node hit over `k` geometric walks (zero on a miss).
pub(crate) fn forward_phase(
    g: &Graph,
    s: NodeId,
    record: &FrontierRecord,
    walks: u64,
    alpha: f64,
    seed: u64,
) -> Result<ForwardOutcome> {
    let start = Instant::now();
    if let Ok(i) = record.targets.binary_search_by_key(&s, |&(u, _)| u) {
        return Ok(ForwardOutcome {
            value: record.targets[i].1,
            walks: 0,
            shortcut: true,
            elapsed: start.elapsed(),
        });
    }
    if record.frontier.is_empty() {
        return Ok(ForwardOutcome {
            value: 0.0,
            walks: 0,
            shortcut: false,
            elapsed: start.elapsed(),
        });
    }
    let lengths = WalkLength::new(alpha)?;
    let mask = NodeMask::from_nodes(g.node_count(), record.frontier.iter().map(|&(u, _)| u));
    let per_batch = run_batches(walks, seed, |rng, count| {
        let mut hits = vec![0u64; record.frontier.len()];
        for _ in 0..count {
            let len = lengths.sample(rng);
            if let Some(h) = walk_first_hit(g, s, len, &mask, rng).hit {
                let i = record
                    .frontier
                    .binary_search_by_key(&h, |&(u, _)| u)
                    .expect("mask and frontier agree");
                hits[i] += 1;
            }
        }
        hits
    });
    let mut hits = vec![0u64; record.frontier.len()];
    for batch in per_batch {
        for (acc, h) in hits.iter_mut().zip(batch) {
            *acc += h;
        }
    }
    let total: f64 = hits
        .iter()
        .zip(&record.frontier)
        .map(|(&h, &(_, p))| h as f64 * p)
        .sum();
    Ok(ForwardOutcome {
        value: total / walks as f64,
        walks,
        shortcut: false,
        elapsed: start.elapsed(),
    })
}

/// Bidirectional estimate of `pi_s(t)` with a fixed reverse threshold.
pub fn fast_ppr(g: &Graph, s: NodeId, t: NodeId, p: &QueryParams) -> Result<Estimate> {
    p.validate()?;
    check_pair(g, s, t)?;
    let eps_r = p.resolved_eps_r(g);
    let frontier = frontier_push(g, t, eps_r, p.beta, p.alpha)?;
    let record = FrontierRecord::from_result(&frontier);
    let fwd = forward_phase(g, s, &record, walk_count(p.c, eps_r, p.delta), p.alpha, p.seed)?;
    Ok(Estimate {
        value: fwd.value,
        algorithm: Algorithm::FastPpr,
        walks_used: fwd.walks,
        frontier_pushes: frontier.push_count,
        forward_time: fwd.elapsed,
        reverse_time: frontier.reverse_time,
        shortcut: fwd.shortcut,
        eps_r: Some(eps_r),
    })
}

/// Bidirectional estimate whose reverse threshold is chosen on the fly so
/// that reverse time matches the predicted forward time.
pub fn balanced_fast_ppr(g: &Graph, s: NodeId, t: NodeId, p: &QueryParams) -> Result<Estimate> {
    p.validate()?;
    check_pair(g, s, t)?;
    let walk_seconds = mean_walk_seconds(g, p.alpha)?;
    balanced_fast_ppr_with(g, s, t, p, walk_seconds)
}

/// [`balanced_fast_ppr`] with an explicit per-walk time in seconds.
pub fn balanced_fast_ppr_with(g: &Graph, s: NodeId, t: NodeId, p: &QueryParams, walk_seconds: f64) -> Result<Estimate> {
    p.validate()?;
    check_pair(g, s, t)?;
    let params = BalanceParams {
        delta: p.delta,
        c: p.c,
        beta: p.beta,
        alpha: p.alpha,
        walk_seconds,
    };
    let frontier = balanced_frontier(g, t, &params)?;
    let record = FrontierRecord::from_result(&frontier);
    let walks = walk_count(p.c, frontier.eps_r, p.delta);
    let fwd = forward_phase(g, s, &record, walks, p.alpha, p.seed)?;
    Ok(Estimate {
        value: fwd.value,
        algorithm: Algorithm::BalancedFastPpr,
        walks_used: fwd.walks,
        frontier_pushes: frontier.push_count,
        forward_time: fwd.elapsed,
        reverse_time: frontier.reverse_time,
        shortcut: fwd.shortcut,
        eps_r: Some(frontier.eps_r),
    })
}

/// Relative-error estimator built on target-avoiding walks.
pub fn theoretical_fast_ppr(
    g: &Graph,
    s: NodeId,
    t: NodeId,
    delta: f64,
    tp: &TheoreticalParams,
    alpha: f64,
    eps_r: f64,
    seed: u64,
) -> Result<Estimate> {
    check_pair(g, s, t)?;
    let derived = tp.derive(delta, eps_r, alpha)?;
    let frontier = frontier_push(g, t, eps_r, derived.beta, alpha)?;
    let start = Instant::now();
    if frontier.in_target_set(s) {
        return Ok(Estimate {
            value: frontier.estimate(s),
            algorithm: Algorithm::TheoreticalFastPpr,
            walks_used: 0,
            frontier_pushes: frontier.push_count,
            forward_time: start.elapsed(),
            reverse_time: frontier.reverse_time,
            shortcut: true,
            eps_r: Some(eps_r),
        });
    }
    let lengths = WalkLength::new(alpha)?;
    let target = frontier.target_mask(g.node_count());
    let sums = run_batches(derived.n_f, seed, |rng, count| -> Result<f64> {
        let mut scores = LazyScores::new(&target, |z| frontier.estimate(z));
        let mut sum = 0.0;
        for _ in 0..count {
            let len = lengths.sample(rng);
            sum += target_avoiding_score(g, s, len, &target, &mut scores, derived.p_min, derived.l_max, rng)?;
        }
        Ok(sum)
    });
    let mut total = 0.0;
    for batch in sums {
        total += batch?;
    }
    Ok(Estimate {
        value: total / derived.n_f as f64,
        algorithm: Algorithm::TheoreticalFastPpr,
        walks_used: derived.n_f,
        frontier_pushes: frontier.push_count,
        forward_time: start.elapsed(),
        reverse_time: frontier.reverse_time,
        shortcut: false,
        eps_r: Some(eps_r),
    })
}

/// Fraction of `ceil(c_mc / delta)` geometric walks from `s` that end at `t`.
pub fn monte_carlo(g: &Graph, s: NodeId, t: NodeId, delta: f64, c_mc: f64, alpha: f64, seed: u64) -> Result<Estimate> {
    check_pair(g, s, t)?;
    check_delta(delta)?;
    if !(c_mc > 0.0) {
        return Err(invalid(format!("c_mc must be positive, got {c_mc}")));
    }
    let lengths = WalkLength::new(alpha)?;
    let walks = (c_mc / delta).ceil().max(1.0) as u64;
    let start = Instant::now();
    let ends: u64 = run_batches(walks, seed, |rng, count| {
        (0..count)
            .filter(|_| {
                let len = lengths.sample(rng);
                walk_endpoint(g, s, len, rng) == t
            })
            .count() as u64
    })
    .into_iter()
    .sum();
    Ok(Estimate {
        value: ends as f64 / walks as f64,
        algorithm: Algorithm::MonteCarlo,
        walks_used: walks,
        frontier_pushes: 0,
        forward_time: start.elapsed(),
        reverse_time: Duration::ZERO,
        shortcut: false,
        eps_r: None,
    })
}

/// Reverse push at `t` to additive accuracy `delta / 2`, read at `s`.
pub fn local_update(g: &Graph, s: NodeId, t: NodeId, delta: f64, alpha: f64) -> Result<Estimate> {
    check_pair(g, s, t)?;
    check_delta(delta)?;
    let start = Instant::now();
    let state = reverse_push(g, t, alpha, alpha * delta / 2.0)?;
    Ok(Estimate {
        value: state.estimate(s),
        algorithm: Algorithm::LocalUpdate,
        walks_used: 0,
        frontier_pushes: state.pushes,
        forward_time: Duration::ZERO,
        reverse_time: start.elapsed(),
        shortcut: false,
        eps_r: None,
    })
}

/// Default settings for [`Algorithm::TheoreticalFastPpr`] when run through
/// [`estimate`].
pub const DEFAULT_THEORETICAL: TheoreticalParams = TheoreticalParams {
    c_rel: 0.5,
    p_fail: 0.1,
};

/// Dispatches to the estimator named by `algorithm`.
pub fn estimate(g: &Graph, algorithm: Algorithm, s: NodeId, t: NodeId, p: &QueryParams) -> Result<Estimate> {
    p.validate()?;
    match algorithm {
        Algorithm::FastPpr => fast_ppr(g, s, t, p),
        Algorithm::BalancedFastPpr => balanced_fast_ppr(g, s, t, p),
        Algorithm::TheoreticalFastPpr => theoretical_fast_ppr(
            g,
            s,
            t,
            p.delta,
            &DEFAULT_THEORETICAL,
            p.alpha,
            p.resolved_eps_r(g),
            p.seed,
        ),
        Algorithm::MonteCarlo => monte_carlo(g, s, t, p.delta, p.c_mc, p.alpha, p.seed),
        Algorithm::LocalUpdate => local_update(g, s, t, p.delta, p.alpha),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accept,
    Reject,
}

/// Accepts iff the estimate exceeds `3 delta / 4`.
pub fn detect_high(e: &Estimate, delta: f64) -> Decision {
    if e.value > 0.75 * delta {
        Decision::Accept
    } else {
        Decision::Reject
    }
}
