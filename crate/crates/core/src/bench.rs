//! Experiment harness: pair sampling, timing runs, accuracy studies, PPR
//! distribution (CCDF) and forward/reverse balance diagnostics.
//!
//! Every experiment takes one run-level seed. Per-query seeds are derived
//! from it and the pair index, and the run seed is written to each row.

use std::io::{Read, Write};
use std::time::Instant;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimators::{balanced_fast_ppr, estimate, fast_ppr, Algorithm, Estimate, QueryParams};
use crate::graph::{Graph, NodeId};
use crate::oracle::{exact_inverse_ppr, global_pagerank};
use crate::walks::mean_walk_seconds;

/// One row of the benchmark CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub graph: String,
    pub algorithm: String,
    pub source: u64,
    pub target: u64,
    pub delta: f64,
    /// Empty when the query failed.
    pub estimate: Option<f64>,
    pub truth: Option<f64>,
    pub rel_err: Option<f64>,
    pub forward_ms: f64,
    pub reverse_ms: f64,
    pub total_ms: f64,
    pub walks: u64,
    pub pushes: u64,
    pub seed: u64,
}

pub const BENCH_HEADER: &str =
    "graph,algorithm,source,target,delta,estimate,truth,rel_err,forward_ms,reverse_ms,total_ms,walks,pushes,seed";

impl BenchRecord {
    fn from_estimate(
        graph: &str,
        g: &Graph,
        (s, t): (NodeId, NodeId),
        delta: f64,
        seed: u64,
        e: &Estimate,
        total_ms: f64,
        truth: Option<f64>,
    ) -> Self {
        BenchRecord {
            graph: graph.to_string(),
            algorithm: e.algorithm.to_string(),
            source: g.label(s),
            target: g.label(t),
            delta,
            estimate: Some(e.value),
            truth,
            rel_err: truth.map(|x| relative_error(e.value, x)),
            forward_ms: ms(e.forward_time),
            reverse_ms: ms(e.reverse_time),
            total_ms,
            walks: e.walks_used,
            pushes: e.frontier_pushes,
            seed,
        }
    }
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

pub fn relative_error(estimate: f64, truth: f64) -> f64 {
    (estimate - truth).abs() / truth
}

/// Seed for the `index`-th query of a run.
pub fn query_seed(run_seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = run_seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn write_records<W: Write>(w: W, records: &[BenchRecord]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(BENCH_HEADER.split(','))?;
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(r: R) -> Result<Vec<BenchRecord>> {
    let mut reader = csv::Reader::from_reader(r);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != BENCH_HEADER {
        return Err(invalid(format!("unexpected bench header {:?}", header.join(","))));
    }
    reader.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetDist {
    Uniform,
    PageRank,
}

/// `k` pairs with uniform sources and targets drawn per `dist`.
pub fn sample_pairs(g: &Graph, k: usize, dist: TargetDist, alpha: f64, seed: u64) -> Result<Vec<(NodeId, NodeId)>> {
    if k == 0 {
        return Err(invalid("pair count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.node_count() as NodeId;
    let weights = match dist {
        TargetDist::Uniform => None,
        TargetDist::PageRank => {
            let pr = global_pagerank(g, alpha, 1e-9 / g.node_count() as f64)?;
            Some(WeightedIndex::new(&pr).map_err(|e| invalid(format!("pagerank weights: {e}")))?)
        }
    };
    Ok((0..k)
        .map(|_| {
            let s = rng.random_range(0..n);
            let t = match &weights {
                None => rng.random_range(0..n),
                Some(w) => w.sample(&mut rng) as NodeId,
            };
            (s, t)
        })
        .collect())
}

/// Runs every algorithm on every pair, one record per (pair, algorithm).
///
/// Pairs run on the current rayon pool; install a single-threaded pool for
/// single-core timings. Failed queries produce a record with no estimate.
pub fn run_timing(
    g: &Graph,
    graph_name: &str,
    pairs: &[(NodeId, NodeId)],
    algorithms: &[Algorithm],
    p: &QueryParams,
) -> Vec<BenchRecord> {
    if algorithms.is_empty() {
        return Vec::new();
    }
    if algorithms.contains(&Algorithm::BalancedFastPpr) {
        // calibrate outside the timed region; a failure resurfaces per query
        let _ = mean_walk_seconds(g, p.alpha);
    }
    let jobs: Vec<(usize, (NodeId, NodeId), Algorithm)> = pairs
        .iter()
        .enumerate()
        .flat_map(|(i, &pair)| algorithms.iter().map(move |&a| (i, pair, a)))
        .collect();
    jobs.into_par_iter()
        .map(|(i, (s, t), alg)| {
            let q = QueryParams {
                seed: query_seed(p.seed, i as u64),
                ..*p
            };
            let start = Instant::now();
            let result = estimate(g, alg, s, t, &q);
            let total_ms = ms(start.elapsed());
            match result {
                Ok(e) => BenchRecord::from_estimate(graph_name, g, (s, t), p.delta, p.seed, &e, total_ms, None),
                Err(_) => BenchRecord {
                    graph: graph_name.to_string(),
                    algorithm: alg.to_string(),
                    source: g.label(s),
                    target: g.label(t),
                    delta: p.delta,
                    estimate: None,
                    truth: None,
                    rel_err: None,
                    forward_ms: 0.0,
                    reverse_ms: 0.0,
                    total_ms,
                    walks: 0,
                    pushes: 0,
                    seed: p.seed,
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AccuracySummary {
    pub pairs: usize,
    pub mean_additive: f64,
    pub max_additive: f64,
    pub mean_relative: f64,
    pub max_relative: f64,
}

impl AccuracySummary {
    pub fn from_records(records: &[BenchRecord]) -> Self {
        let mut s = AccuracySummary::default();
        for r in records {
            let (Some(est), Some(truth)) = (r.estimate, r.truth) else {
                continue;
            };
            let add = (est - truth).abs();
            let rel = relative_error(est, truth);
            s.pairs += 1;
            s.mean_additive += add;
            s.mean_relative += rel;
            s.max_additive = s.max_additive.max(add);
            s.max_relative = s.max_relative.max(rel);
        }
        if s.pairs > 0 {
            s.mean_additive /= s.pairs as f64;
            s.mean_relative /= s.pairs as f64;
        }
        s
    }

    /// Rows in the layout of the accuracy table.
    pub fn table(&self, delta: f64) -> Vec<(&'static str, f64)> {
        vec![
            ("Threshold", delta),
            ("Average Additive Error", self.mean_additive),
            ("Max Additive Error", self.max_additive),
            ("Average Relative Error", self.mean_relative),
            ("Max Relative Error", self.max_relative),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct AccuracyReport {
    pub records: Vec<BenchRecord>,
    pub summary: AccuracySummary,
    /// Targets discarded because one of their bins was empty.
    pub resampled: Vec<NodeId>,
}

/// Samples targets uniformly; for each, bins sources by ground-truth value
/// into `[delta/4, delta)` and `[delta, 4 delta]`, draws up to `per_bin`
/// from each bin and runs FAST-PPR on every pair.
pub fn accuracy_experiment(
    g: &Graph,
    graph_name: &str,
    targets: usize,
    per_bin: usize,
    p: &QueryParams,
) -> Result<AccuracyReport> {
    p.validate()?;
    if targets == 0 || per_bin == 0 {
        return Err(invalid("target and per-bin counts must be positive"));
    }
    let delta = p.delta;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let n = g.node_count() as NodeId;
    let max_attempts = 100 * targets + 1000;
    let mut resampled = Vec::new();
    let mut jobs: Vec<(NodeId, NodeId, f64)> = Vec::new();
    let mut accepted = 0;
    for _ in 0..max_attempts {
        if accepted == targets {
            break;
        }
        let t = rng.random_range(0..n);
        let truth = exact_inverse_ppr(g, t, p.alpha, delta / 100.0)?;
        let (mut low, mut high) = (Vec::new(), Vec::new());
        for (s, &v) in truth.values.iter().enumerate() {
            if v >= delta / 4.0 && v < delta {
                low.push(s as NodeId);
            } else if v >= delta && v <= 4.0 * delta {
                high.push(s as NodeId);
            }
        }
        if low.is_empty() || high.is_empty() {
            resampled.push(t);
            continue;
        }
        accepted += 1;
        for bin in [&low, &high] {
            let take = per_bin.min(bin.len());
            for i in index::sample(&mut rng, bin.len(), take) {
                let s = bin[i];
                jobs.push((s, t, truth.get(s)));
            }
        }
    }
    if accepted < targets {
        return Err(invalid(format!(
            "only {accepted} of {targets} targets had sources in both bins after {max_attempts} draws"
        )));
    }
    let records: Vec<BenchRecord> = jobs
        .into_par_iter()
        .enumerate()
        .map(|(i, (s, t, truth))| {
            let q = QueryParams {
                seed: query_seed(p.seed, i as u64),
                ..*p
            };
            let start = Instant::now();
            let e = fast_ppr(g, s, t, &q)?;
            let total_ms = ms(start.elapsed());
            Ok(BenchRecord::from_estimate(
                graph_name,
                g,
                (s, t),
                delta,
                p.seed,
                &e,
                total_ms,
                Some(truth),
            ))
        })
        .collect::<Result<_>>()?;
    let summary = AccuracySummary::from_records(&records);
    Ok(AccuracyReport {
        records,
        summary,
        resampled,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcdfRow {
    pub threshold: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone)]
pub struct CcdfTable {
    pub estimates: Vec<f64>,
    pub rows: Vec<CcdfRow>,
}

impl CcdfTable {
    /// Fraction of pairs whose estimate is at least `x`.
    pub fn fraction_at(&self, x: f64) -> f64 {
        self.estimates.iter().filter(|&&e| e >= x).count() as f64 / self.estimates.len() as f64
    }
}

const CCDF_POINTS_PER_DECADE: usize = 10;

/// Estimates `k` uniform pairs with FAST-PPR at accuracy `delta_floor` and
/// tabulates the CCDF at 0 and at log-spaced thresholds from `delta_floor` to 1.
pub fn ppr_ccdf(g: &Graph, k: usize, delta_floor: f64, p: &QueryParams) -> Result<CcdfTable> {
    if !(delta_floor > 0.0 && delta_floor < 1.0) {
        return Err(invalid(format!("delta floor must lie in (0, 1), got {delta_floor}")));
    }
    let q = QueryParams {
        delta: delta_floor,
        ..*p
    };
    q.validate()?;
    let pairs = sample_pairs(g, k, TargetDist::Uniform, p.alpha, p.seed)?;
    let estimates = pairs
        .par_iter()
        .enumerate()
        .map(|(i, &(s, t))| {
            let qi = QueryParams {
                seed: query_seed(p.seed, i as u64),
                ..q
            };
            fast_ppr(g, s, t, &qi).map(|e| e.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let decades = -delta_floor.log10();
    let steps = (decades * CCDF_POINTS_PER_DECADE as f64).ceil() as usize;
    let mut thresholds = vec![0.0];
    thresholds.extend((0..=steps).map(|i| {
        let frac = i as f64 / steps.max(1) as f64;
        10f64.powf(delta_floor.log10() * (1.0 - frac))
    }));
    let mut table = CcdfTable {
        estimates,
        rows: Vec::new(),
    };
    table.rows = thresholds
        .into_iter()
        .map(|threshold| CcdfRow {
            threshold,
            fraction: table.fraction_at(threshold),
        })
        .collect();
    Ok(table)
}

pub fn write_ccdf<W: Write>(w: W, rows: &[CcdfRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_ccdf<R: Read>(r: R) -> Result<Vec<CcdfRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Forward and reverse time for both bidirectional variants at one target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceRow {
    pub percentile: f64,
    pub target: u64,
    pub pagerank: f64,
    pub fastppr_forward_ms: f64,
    pub fastppr_reverse_ms: f64,
    pub balanced_forward_ms: f64,
    pub balanced_reverse_ms: f64,
    pub balanced_eps_r: f64,
    /// The four timing columns after 5-point median smoothing across percentiles.
    pub smooth_fastppr_forward_ms: f64,
    pub smooth_fastppr_reverse_ms: f64,
    pub smooth_balanced_forward_ms: f64,
    pub smooth_balanced_reverse_ms: f64,
}

/// Centered running median with window `width` (shrunk at the ends).
pub fn median_smooth(values: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            let mut w = values[lo..hi].to_vec();
            w.sort_by(f64::total_cmp);
            let m = w.len();
            if m % 2 == 1 {
                w[m / 2]
            } else {
                (w[m / 2 - 1] + w[m / 2]) / 2.0
            }
        })
        .collect()
}

/// Sorts nodes by global PageRank, takes the first target of each requested
/// percentile and times both bidirectional variants on it, averaging over
/// `sources` uniform sources. Runs sequentially so timings are single-core.
pub fn balance_diagnostics(g: &Graph, percentiles: &[f64], sources: usize, p: &QueryParams) -> Result<Vec<BalanceRow>> {
    p.validate()?;
    if sources == 0 {
        return Err(invalid("need at least one source per target"));
    }
    mean_walk_seconds(g, p.alpha)?;
    let pr = global_pagerank(g, p.alpha, 1e-9 / g.node_count() as f64)?;
    let mut order: Vec<NodeId> = g.nodes().collect();
    order.sort_by(|&a, &b| pr[a as usize].total_cmp(&pr[b as usize]).then(a.cmp(&b)));
    let n = g.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut rows = Vec::with_capacity(percentiles.len());
    for (pi, &pct) in percentiles.iter().enumerate() {
        if !(0.0..=100.0).contains(&pct) {
            return Err(invalid(format!("percentile {pct} outside [0, 100]")));
        }
        let idx = ((pct / 100.0 * n as f64).floor() as usize).min(n - 1);
        let t = order[idx];
        let mut acc = [0.0f64; 5];
        for j in 0..sources {
            let s = rng.random_range(0..n as NodeId);
            let q = QueryParams {
                seed: query_seed(p.seed, (pi * sources + j) as u64),
                ..*p
            };
            let vanilla = fast_ppr(g, s, t, &q)?;
            let balanced = balanced_fast_ppr(g, s, t, &q)?;
            acc[0] += ms(vanilla.forward_time);
            acc[1] += ms(vanilla.reverse_time);
            acc[2] += ms(balanced.forward_time);
            acc[3] += ms(balanced.reverse_time);
            acc[4] += balanced.eps_r.unwrap_or(0.0);
        }
        let k = sources as f64;
        rows.push(BalanceRow {
            percentile: pct,
            target: g.label(t),
            pagerank: pr[t as usize],
            fastppr_forward_ms: acc[0] / k,
            fastppr_reverse_ms: acc[1] / k,
            balanced_forward_ms: acc[2] / k,
            balanced_reverse_ms: acc[3] / k,
            balanced_eps_r: acc[4] / k,
            smooth_fastppr_forward_ms: 0.0,
            smooth_fastppr_reverse_ms: 0.0,
            smooth_balanced_forward_ms: 0.0,
            smooth_balanced_reverse_ms: 0.0,
        });
    }
    let column = |f: fn(&BalanceRow) -> f64| median_smooth(&rows.iter().map(f).collect::<Vec<_>>(), 5);
    let smoothed = [
        column(|r| r.fastppr_forward_ms),
        column(|r| r.fastppr_reverse_ms),
        column(|r| r.balanced_forward_ms),
        column(|r| r.balanced_reverse_ms),
    ];
    for (i, r) in rows.iter_mut().enumerate() {
        r.smooth_fastppr_forward_ms = smoothed[0][i];
        r.smooth_fastppr_reverse_ms = smoothed[1][i];
        r.smooth_balanced_forward_ms = smoothed[2][i];
        r.smooth_balanced_reverse_ms = smoothed[3][i];
    }
    Ok(rows)
}

pub fn write_balance<W: Write>(w: W, rows: &[BalanceRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Runs `f` on a dedicated single-threaded rayon pool.
pub fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("single-thread pool")
        .install(f)
}
