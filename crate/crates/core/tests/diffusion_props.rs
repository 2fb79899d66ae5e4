//! IC simulation, candidate sets and the simulation-based baselines.

mod common;

use std::collections::BTreeMap;

use cascade_source::candidates::candidate_set;
use cascade_source::detectors::{baseline_im, baseline_random};
use cascade_source::diffusion::{activation_probability_trace, AttemptOrder, Simulator};
use cascade_source::{parse_weighted, seed, WeightedDigraph};
use common::*;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn cascades_are_trees_and_contain_their_source(
        n in 2usize..40,
        density in 0.02f64..0.4,
        gseed in any::<u64>(),
        pick in any::<usize>(),
        cseed in any::<u64>(),
    ) {
        let g = random_digraph(n, density, gseed);
        let source = pick % n;
        let c = Simulator::new().simulate(&g, source, cseed, AttemptOrder::Ascending).unwrap();
        let active = c.active();
        prop_assert!(c.validate(&g).is_ok());
        prop_assert_eq!(&c.rounds[0], &vec![source]);
        prop_assert_eq!(c.edges.len(), active.len() - 1);

        let mut round_of = vec![None; n];
        for (t, round) in c.rounds.iter().enumerate() {
            prop_assert!(!round.is_empty());
            for &v in round {
                prop_assert!(round_of[v].is_none());
                round_of[v] = Some(t);
            }
        }
        let mut parent = vec![None; n];
        for &(u, v) in &c.edges {
            prop_assert!(g.weight(u, v).is_some());
            prop_assert!(parent[v].is_none());
            parent[v] = Some(u);
            prop_assert_eq!(round_of[u].unwrap() + 1, round_of[v].unwrap());
        }
        prop_assert!(parent[source].is_none());
        for &v in &active {
            prop_assert!(v == source || parent[v].is_some());
        }
        let product: f64 = c.edges.iter().map(|&(u, v)| g.weight(u, v).unwrap()).product();
        prop_assert_eq!(activation_probability_trace(&c, &g).unwrap(), product);

        // Candidate set against a per-node BFS inside G[A].
        let cands = candidate_set(&g, &active).unwrap();
        prop_assert!(cands.contains(source));
        let in_a: Vec<bool> = (0..n).map(|v| active.binary_search(&v).is_ok()).collect();
        let inside: Vec<(usize, usize, f64)> =
            edges_of(&g).into_iter().filter(|e| in_a[e.0] && in_a[e.1]).collect();
        let covers = |v: usize| {
            let r = reach(n, &inside, v, |_| true);
            active.iter().all(|&a| r[a])
        };
        let oracle: Vec<usize> = active.iter().copied().filter(|&v| covers(v)).collect();
        prop_assert_eq!(&cands.nodes, &oracle);
        prop_assert_eq!(cands.is_singleton, oracle.len() == 1);
        prop_assert!(cands.strongly_connected);
    }
}

#[test]
fn fig_1a_full_activation_frequency() {
    let g = parse_weighted(FIG_1A).unwrap();
    let mut sim = Simulator::new();
    let trials = 1_000_000u64;
    let hits = (0..trials)
        .filter(|&s| sim.active_count(&g, 0, s) == 4)
        .count() as f64;
    let p = 0.1 * 0.3 * 0.6;
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    let phat = hits / trials as f64;
    assert!((phat - p).abs() <= 3.0 * se, "{phat} vs {p} (se {se})");
}

fn mean_active(g: &WeightedDigraph, source: usize, seeds: std::ops::Range<u64>) -> f64 {
    let mut sim = Simulator::new();
    let k = seeds.end - seeds.start;
    seeds
        .map(|s| sim.active_count(g, source, s) as f64)
        .sum::<f64>()
        / k as f64
}

#[test]
fn larger_weights_do_not_shrink_cascades() {
    let g = random_digraph(60, 0.05, 17)
        .map_weights(|e| e.p * 0.4)
        .unwrap();
    let doubled = g.map_weights(|e| (2.0 * e.p).min(1.0)).unwrap();
    for source in [0, 7, 31] {
        let base = mean_active(&g, source, 0..10_000);
        let more = mean_active(&doubled, source, 0..10_000);
        assert!(more >= base, "source {source}: {more} < {base}");
    }
}

#[test]
fn attempt_order_does_not_change_size_distribution() {
    let g = random_digraph(30, 0.1, 5)
        .map_weights(|e| e.p * 0.4)
        .unwrap();
    let mut sim = Simulator::new();
    let histogram = |sim: &mut Simulator, order, offset: u64| {
        let mut h = BTreeMap::new();
        for s in 0..100_000u64 {
            let size = sim
                .simulate(&g, 0, s + offset, order)
                .unwrap()
                .active_count();
            *h.entry(size).or_insert(0u64) += 1;
        }
        h
    };
    let asc = histogram(&mut sim, AttemptOrder::Ascending, 0);
    let desc = histogram(&mut sim, AttemptOrder::Descending, 1 << 40);

    // Pool sparse sizes so every cell has a reasonable expected count.
    let mut sizes: Vec<usize> = asc.keys().chain(desc.keys()).copied().collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut cells: Vec<(u64, u64)> = Vec::new();
    let mut cur = (0u64, 0u64);
    for s in sizes {
        cur.0 += asc.get(&s).copied().unwrap_or(0);
        cur.1 += desc.get(&s).copied().unwrap_or(0);
        if cur.0 + cur.1 >= 200 {
            cells.push(cur);
            cur = (0, 0);
        }
    }
    if let Some(last) = cells.last_mut() {
        last.0 += cur.0;
        last.1 += cur.1;
    }
    let (na, nb) = (100_000f64, 100_000f64);
    let mut stat = 0.0;
    for &(a, b) in &cells {
        let pooled = (a + b) as f64 / (na + nb);
        for (obs, tot) in [(a as f64, na), (b as f64, nb)] {
            let exp = pooled * tot;
            stat += (obs - exp).powi(2) / exp;
        }
    }
    let df = (cells.len() - 1) as f64;
    let p = 1.0 - ChiSquared::new(df).unwrap().cdf(stat);
    assert!(cells.len() >= 3);
    assert!(p > 0.01, "chi2 = {stat}, df = {df}, p = {p}");
}

/// E|active| from each root, by enumerating live-edge subsets.
fn expected_sizes(g: &WeightedDigraph) -> Vec<f64> {
    let n = g.node_count();
    let edges = edges_of(g);
    let m = edges.len();
    let mut out = vec![0.0; n];
    for mask in 0u64..(1 << m) {
        let on = |k: usize| mask >> k & 1 == 1;
        let p: f64 = (0..m)
            .map(|k| if on(k) { edges[k].2 } else { 1.0 - edges[k].2 })
            .product();
        for (r, o) in out.iter_mut().enumerate() {
            *o += p * reach(n, &edges, r, on).iter().filter(|&&x| x).count() as f64;
        }
    }
    out
}

#[test]
fn im_means_match_live_edge_expectation() {
    let g = parse_weighted(FIG_1B).unwrap();
    let expect = expected_sizes(&g);
    let sims = 100_000u32;
    let master = 2024;
    let mut sim = Simulator::new();
    let mut means = Vec::new();
    for (v, &e) in expect.iter().enumerate() {
        let xs: Vec<f64> = (0..sims)
            .map(|k| sim.active_count(&g, v, seed::derive(master, &[v as u64, k as u64])) as f64)
            .collect();
        let mean = xs.iter().sum::<f64>() / sims as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (sims - 1) as f64;
        let se = (var / sims as f64).sqrt();
        assert!((mean - e).abs() <= 3.0 * se, "node {v}: {mean} vs {e}");
        means.push(mean);
    }
    let sv = baseline_im(&g, &[0, 1, 2, 3], sims, master).unwrap();
    assert!(max_abs_diff(&sv.scores, &normalized(&means)) < 1e-12);
}

#[test]
fn random_baseline_is_uniform() {
    let n = 7;
    let draws = 10_000u64;
    let mut counts = vec![0u64; n];
    for s in 0..draws {
        counts[baseline_random(n, seed::derive(99, &[s])).argmax] += 1;
    }
    let p = 1.0 / n as f64;
    let se = (p * (1.0 - p) / draws as f64).sqrt();
    for c in counts {
        assert!((c as f64 / draws as f64 - p).abs() <= 3.0 * se);
    }
}
