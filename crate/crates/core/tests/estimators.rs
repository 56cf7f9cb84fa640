//! Estimators against exact oracles on small graphs.

use fastppr::bench::single_threaded;
use fastppr::estimators::{
    balanced_fast_ppr_with, detect_high, estimate, fast_ppr, local_update, monte_carlo, theoretical_fast_ppr,
    walk_count, Algorithm, Decision, QueryParams, TheoreticalParams, DEFAULT_ALPHA,
};
use fastppr::frontier::{frontier_push, FrontierResult};
use fastppr::oracle::{exact_inverse_ppr, power_iteration_ppr};
use fastppr::synthetic::{random_digraph, two_cycle};
use fastppr::{Error, Graph, NodeId};

const ALPHA: f64 = DEFAULT_ALPHA;

/// `h[x][i]`: probability that a geometric walk from `x` first meets the
/// frontier at `frontier[i]`.
fn hitting_distribution(g: &Graph, frontier: &[NodeId]) -> Vec<Vec<f64>> {
    let n = g.node_count();
    let k = frontier.len();
    let slot = |u: NodeId| frontier.binary_search(&u).ok();
    let mut h = vec![vec![0.0; k]; n];
    for _ in 0..2000 {
        let mut next = vec![vec![0.0; k]; n];
        for x in g.nodes() {
            if let Some(i) = slot(x) {
                next[x as usize][i] = 1.0;
                continue;
            }
            let d = g.out_degree(x) as f64;
            for &y in g.out_neighbors(x) {
                for i in 0..k {
                    next[x as usize][i] += (1.0 - ALPHA) * h[y as usize][i] / d;
                }
            }
        }
        h = next;
    }
    h
}

/// Mean and per-walk variance of the forward estimate from `s`.
fn forward_moments(g: &Graph, s: NodeId, f: &FrontierResult) -> (f64, f64) {
    let h = hitting_distribution(g, &f.frontier_set);
    let (mut mean, mut second) = (0.0, 0.0);
    for (i, &u) in f.frontier_set.iter().enumerate() {
        let p = f.estimate(u);
        mean += h[s as usize][i] * p;
        second += h[s as usize][i] * p * p;
    }
    (mean, second - mean * mean)
}

fn small_graphs() -> Vec<Graph> {
    (0..6).map(|i| random_digraph(25, 80, 300 + i).unwrap()).collect()
}

#[test]
fn frontier_decomposition_is_exact() {
    // with exact frontier values, the hitting mixture reproduces pi_s(t)
    for g in small_graphs() {
        for t in [0, 7, 19] {
            let f = frontier_push(&g, t, 0.05, 1.0 / 6.0, ALPHA).unwrap();
            let inv = exact_inverse_ppr(&g, t, ALPHA, 1e-12).unwrap();
            let h = hitting_distribution(&g, &f.frontier_set);
            for s in g.nodes().filter(|&s| !f.in_target_set(s)) {
                let mix: f64 = f
                    .frontier_set
                    .iter()
                    .enumerate()
                    .map(|(i, &u)| h[s as usize][i] * inv.get(u))
                    .sum();
                assert!((mix - inv.get(s)).abs() < 1e-9, "s={s} t={t}: {mix} vs {}", inv.get(s));
            }
        }
    }
}

#[test]
fn fast_ppr_mean_matches_hitting_oracle() {
    let delta = 0.01;
    for (gi, g) in small_graphs().into_iter().enumerate() {
        let t = (gi * 3) as NodeId;
        let p = QueryParams::new(delta).with_eps_r(0.1).with_seed(gi as u64);
        let f = frontier_push(&g, t, 0.1, p.beta, p.alpha).unwrap();
        let inv = exact_inverse_ppr(&g, t, ALPHA, 1e-12).unwrap();
        let k = walk_count(p.c, 0.1, delta) as f64;
        for s in g.nodes().filter(|&s| !f.in_target_set(s)).take(6) {
            let e = fast_ppr(&g, s, t, &p).unwrap();
            let (mean, var) = forward_moments(&g, s, &f);
            let se = (var / k).sqrt();
            assert!(
                (e.value - mean).abs() <= 4.0 * se + 1e-12,
                "s={s}: {} vs {mean} (se {se})",
                e.value
            );
            // the mean itself trails the truth by at most beta * eps_r
            let truth = inv.get(s);
            assert!(
                mean <= truth + 1e-12 && truth - mean <= p.beta * 0.1,
                "{mean} vs {truth}"
            );
        }
    }
}

#[test]
fn fast_ppr_shortcut_returns_target_set_estimate() {
    for g in small_graphs() {
        let f = frontier_push(&g, 4, 0.02, 1.0 / 6.0, ALPHA).unwrap();
        let p = QueryParams::new(0.01).with_eps_r(0.02);
        for &s in &f.target_set {
            let e = fast_ppr(&g, s, 4, &p).unwrap();
            assert!(e.shortcut);
            assert_eq!(e.walks_used, 0);
            assert_eq!(e.value, f.estimate(s));
        }
    }
}

#[test]
fn fast_ppr_stays_within_frontier_range() {
    for g in small_graphs() {
        let p = QueryParams::new(0.005).with_eps_r(0.1);
        let f = frontier_push(&g, 1, 0.1, p.beta, p.alpha).unwrap();
        let cap = f.frontier_set.iter().map(|&u| f.estimate(u)).fold(0.0, f64::max);
        for s in g.nodes().filter(|&s| !f.in_target_set(s)) {
            let v = fast_ppr(&g, s, 1, &p.with_seed(s as u64)).unwrap().value;
            assert!((0.0..=cap + 1e-15).contains(&v), "{v} outside [0, {cap}]");
        }
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let g = random_digraph(200, 1000, 17).unwrap();
    let p = QueryParams::new(1e-4).with_eps_r(0.2).with_seed(5);
    let run = |alg| estimate(&g, alg, 3, 11, &p).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    for alg in [Algorithm::FastPpr, Algorithm::MonteCarlo] {
        let one = single_threaded(|| run(alg));
        let many = pool.install(|| run(alg));
        assert!(one.walks_used > 1024, "{alg} should span several batches");
        assert_eq!(one.value.to_bits(), many.value.to_bits(), "{alg}");
    }
}

#[test]
fn two_cycle_values() {
    // pi_1(0) = (1 - alpha) / (2 - alpha) on the two-cycle
    let g = two_cycle();
    let truth = 0.8 / 1.8;
    let p = QueryParams::new(0.1).with_eps_r(0.3).with_seed(1);
    let e = fast_ppr(&g, 1, 0, &p).unwrap();
    assert!(e.shortcut);
    assert!((e.value - truth).abs() < 0.05);

    let b = balanced_fast_ppr_with(&g, 1, 0, &p, 1e-7).unwrap();
    let eps = b.eps_r.unwrap();
    assert!(b.value <= truth + 1e-12 && truth - b.value <= p.beta * eps + 1e-12);

    let lu = local_update(&g, 1, 0, 0.01, ALPHA).unwrap();
    assert!((lu.value - truth).abs() <= 0.005);
}

#[test]
fn balanced_estimate_is_centered_on_its_frontier() {
    let delta = 0.01;
    for (gi, g) in small_graphs().into_iter().enumerate().take(3) {
        let t = gi as NodeId + 2;
        for walk_seconds in [1e-9, 1e-6] {
            let p = QueryParams::new(delta).with_seed(gi as u64);
            let e = balanced_fast_ppr_with(&g, 0, t, &p, walk_seconds).unwrap();
            let eps = e.eps_r.unwrap();
            let f = frontier_push(&g, t, eps, p.beta, p.alpha).unwrap();
            let truth = power_iteration_ppr(&g, 0, ALPHA, 1e-12).unwrap().get(t);
            if e.shortcut {
                assert!(truth - e.value <= p.beta * eps + 1e-12);
                continue;
            }
            // the fixed push at the chosen threshold bounds the same bias
            let (mean, var) = forward_moments(&g, 0, &f);
            let se = (var / e.walks_used as f64).sqrt();
            assert!(truth - mean <= p.beta * eps + 1e-12);
            assert!(e.value <= truth + 4.0 * se + 1e-12, "{} vs {truth}", e.value);
            assert!(
                truth - e.value <= p.beta * eps + 4.0 * se + 1e-12,
                "{} vs {truth}",
                e.value
            );
        }
    }
}

#[test]
fn local_update_within_half_delta() {
    for delta in [0.05, 0.01, 0.001] {
        for g in small_graphs() {
            for t in [0, 12] {
                let inv = exact_inverse_ppr(&g, t, ALPHA, 1e-12).unwrap();
                for s in g.nodes() {
                    let v = local_update(&g, s, t, delta, ALPHA).unwrap().value;
                    let err = inv.get(s) - v;
                    assert!(
                        (-1e-12..=delta / 2.0).contains(&err),
                        "delta={delta} s={s} t={t}: err {err}"
                    );
                }
            }
        }
    }
}

#[test]
fn triangle_local_update() {
    let g = fastppr::load_edge_list("0 1\n1 2\n2 0".as_bytes(), false).unwrap();
    // pi_2(0) = alpha (1 - alpha) / (1 - (1 - alpha)^3)
    let v = local_update(&g, 2, 0, 0.01, ALPHA).unwrap().value;
    assert!((v - 0.32787).abs() < 0.005, "{v}");
}

#[test]
fn monte_carlo_within_three_standard_errors() {
    let g = random_digraph(30, 120, 9).unwrap();
    let delta = 1e-3;
    let mut outside = 0;
    for i in 0..10u32 {
        let (s, t) = (i, (i * 7 + 3) % 30);
        let truth = power_iteration_ppr(&g, s, ALPHA, 1e-12).unwrap().get(t);
        let e = monte_carlo(&g, s, t, delta, 35.0, ALPHA, i as u64).unwrap();
        let se = (truth * (1.0 - truth) / e.walks_used as f64).sqrt();
        if (e.value - truth).abs() > 3.0 * se {
            outside += 1;
        }
    }
    assert!(outside <= 1, "{outside} of 10 estimates beyond 3 SE");
}

#[test]
fn detect_high_through_dispatch() {
    let g = two_cycle();
    let p = QueryParams::new(0.3).with_eps_r(0.9);
    for alg in [Algorithm::FastPpr, Algorithm::MonteCarlo, Algorithm::LocalUpdate] {
        let e = estimate(&g, alg, 1, 0, &p).unwrap();
        assert_eq!(detect_high(&e, p.delta), Decision::Accept, "{alg}: {}", e.value);
    }
    let cut = Graph::from_edges(3, [(0, 1), (1, 0), (2, 2)]).unwrap();
    let e = estimate(&cut, Algorithm::FastPpr, 2, 0, &QueryParams::new(0.1)).unwrap();
    assert_eq!(detect_high(&e, 0.1), Decision::Reject);
}

#[test]
fn theoretical_rejects_bad_relative_error() {
    let g = two_cycle();
    for c_rel in [0.0, 1.0, 1.5] {
        let tp = TheoreticalParams { c_rel, p_fail: 0.1 };
        let err = theoretical_fast_ppr(&g, 0, 1, 0.1, &tp, ALPHA, 0.5, 0).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)), "{err}");
    }
}

#[test]
fn bad_queries_are_rejected() {
    let g = two_cycle();
    assert!(matches!(
        fast_ppr(&g, 0, 5, &QueryParams::new(0.1)).unwrap_err(),
        Error::NodeOutOfRange { .. }
    ));
    assert!(fast_ppr(&g, 0, 1, &QueryParams::new(0.0)).is_err());
    assert!(fast_ppr(&g, 0, 1, &QueryParams::new(0.1).with_eps_r(1.5)).is_err());
    assert!(local_update(&g, 0, 1, 1.0, ALPHA).is_err());
}
