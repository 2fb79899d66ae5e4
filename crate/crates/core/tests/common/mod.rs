#![allow(dead_code)]

use cascade_source::candidates::is_strongly_connected;
use cascade_source::seed;
use cascade_source::WeightedDigraph;
use rand::seq::SliceRandom;
use rand::Rng;

pub const FIG_1A: &str = "0 1 0.1\n1 2 0.3\n2 3 0.6\n3 0 0.2\n";
pub const FIG_1B: &str = "0 1 0.1\n1 2 0.3\n2 3 0.6\n3 0 0.2\n3 1 0.4\n";
pub const FIG_1B_FULL: &str = "0 1 0.1\n1 2 0.3\n2 3 0.6\n3 0 0.2\n3 1 0.4\n2 4 0.5\n";

/// Strongly connected digraph on `n` nodes: a random Hamiltonian cycle plus
/// each remaining ordered pair with probability `extra`. Weights lie in
/// `[0.05, 1]`.
pub fn strongly_connected(n: usize, extra: f64, s: u64) -> WeightedDigraph {
    let mut rng = seed::stream(s);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut pairs = std::collections::BTreeSet::new();
    for k in 0..n {
        pairs.insert((order[k], order[(k + 1) % n]));
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.gen::<f64>() < extra {
                pairs.insert((i, j));
            }
        }
    }
    let edges: Vec<(usize, usize, f64)> = pairs
        .into_iter()
        .map(|(i, j)| (i, j, rng.gen_range(0.05..=1.0)))
        .collect();
    let g = WeightedDigraph::from_edges(n, edges).unwrap();
    assert!(is_strongly_connected(&g));
    g
}

/// Random digraph, not necessarily connected.
pub fn random_digraph(n: usize, density: f64, s: u64) -> WeightedDigraph {
    let mut rng = seed::stream(s);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.gen::<f64>() < density {
                edges.push((i, j, rng.gen_range(0.05..=1.0)));
            }
        }
    }
    WeightedDigraph::from_edges(n, edges).unwrap()
}

pub fn edges_of(g: &WeightedDigraph) -> Vec<(usize, usize, f64)> {
    g.edges().iter().map(|e| (e.src, e.dst, e.p)).collect()
}

pub fn normalized(v: &[f64]) -> Vec<f64> {
    let t: f64 = v.iter().sum();
    v.iter().map(|x| x / t).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Nodes reachable from `root` using only edges with `keep(edge index)`.
pub fn reach(
    n: usize,
    edges: &[(usize, usize, f64)],
    root: usize,
    keep: impl Fn(usize) -> bool,
) -> Vec<bool> {
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut stack = vec![root];
    while let Some(u) = stack.pop() {
        for (k, &(s, d, _)) in edges.iter().enumerate() {
            if s == u && keep(k) && !seen[d] {
                seen[d] = true;
                stack.push(d);
            }
        }
    }
    seen
}
