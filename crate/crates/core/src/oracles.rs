//! Exact reference computations used to check the chain-based scores.
//!
//! * [`brute_force_posterior`] sums realization probabilities over every
//!   subset of the active edges.
//! * [`enumerate_out_trees`] / [`gamma_exact`] list spanning out-trees
//!   explicitly.
//! * [`arborescence_weight_sum`] evaluates the same sums as a determinant of
//!   a weighted Laplacian minor (directed matrix-tree theorem).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::WeightedDigraph;
use crate::linalg::Lu;

pub const MAX_BRUTE_FORCE_EDGES: usize = 25;
pub const MAX_ENUMERATION_NODES: usize = 8;

/// Exact joint probabilities `P(R_i, A)` and their normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPosterior {
    pub joint: Vec<f64>,
    pub posterior: Vec<f64>,
    /// Total probability of all edge subsets (1 up to rounding).
    pub total_mass: f64,
}

/// Edge-subset enumeration with incremental (Gray-code) probabilities.
pub fn brute_force_posterior(g: &WeightedDigraph) -> Result<ExactPosterior> {
    let m = g.edge_count();
    let n = g.node_count();
    if m > MAX_BRUTE_FORCE_EDGES {
        return Err(Error::Capacity {
            what: "edge count for brute force",
            limit: MAX_BRUTE_FORCE_EDGES,
            got: m,
        });
    }
    if n > 64 {
        return Err(Error::Capacity {
            what: "node count for brute force",
            limit: 64,
            got: n,
        });
    }
    let edges: Vec<(usize, usize, f64)> = g.edges().iter().map(|e| (e.src, e.dst, e.p)).collect();

    // Fix the top `split` edges per chunk; Gray-walk the rest.
    let split = m.saturating_sub(14).min(8);
    let low = m - split;
    let partials: Vec<(Vec<f64>, f64)> = (0..1u64 << split)
        .into_par_iter()
        .map(|high| subset_chunk(n, &edges, low, high))
        .collect();

    let mut joint = vec![0.0; n];
    let mut total_mass = 0.0;
    for (part, mass) in partials {
        for (j, p) in joint.iter_mut().zip(part) {
            *j += p;
        }
        total_mass += mass;
    }
    let z: f64 = joint.iter().sum();
    let posterior = if z > 0.0 {
        joint.iter().map(|p| p / z).collect()
    } else {
        vec![0.0; n]
    };
    Ok(ExactPosterior {
        joint,
        posterior,
        total_mass,
    })
}

/// Probability factors of one chunk: edges `low..` are fixed by the bits of
/// `high`, edges `0..low` run through every combination in Gray order.
fn subset_chunk(n: usize, edges: &[(usize, usize, f64)], low: usize, high: u64) -> (Vec<f64>, f64) {
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut adj = vec![0u64; n];
    let mut indeg = vec![0u32; n];
    let mut base = 1.0;
    for (k, &(s, d, p)) in edges.iter().enumerate().skip(low) {
        if high >> (k - low) & 1 == 1 {
            adj[s] |= 1 << d;
            indeg[d] += 1;
            base *= p;
        } else {
            base *= 1.0 - p;
        }
    }
    let factor = |k: usize, on: bool| if on { edges[k].2 } else { 1.0 - edges[k].2 };

    let mut on = vec![false; low];
    let mut nonzero = base;
    let mut zeros = 0usize;
    for k in 0..low {
        let f = factor(k, false);
        if f == 0.0 {
            zeros += 1;
        } else {
            nonzero *= f;
        }
    }

    let mut acc = vec![0.0; n];
    let mut mass = 0.0;
    let count = 1u64 << low;
    for step in 0..count {
        if step > 0 {
            let k = step.trailing_zeros() as usize;
            let old = factor(k, on[k]);
            on[k] = !on[k];
            let new = factor(k, on[k]);
            let (s, d, _) = edges[k];
            if on[k] {
                adj[s] |= 1 << d;
                indeg[d] += 1;
            } else {
                adj[s] &= !(1 << d);
                indeg[d] -= 1;
            }
            if old == 0.0 {
                zeros -= 1;
            } else {
                nonzero /= old;
            }
            if new == 0.0 {
                zeros += 1;
            } else {
                nonzero *= new;
            }
            if step % 4096 == 0 {
                nonzero = base;
                zeros = 0;
                for (j, &flag) in on.iter().enumerate() {
                    let f = factor(j, flag);
                    if f == 0.0 {
                        zeros += 1;
                    } else {
                        nonzero *= f;
                    }
                }
            }
        }
        if zeros > 0 {
            continue;
        }
        let p = nonzero;
        mass += p;
        credit_spanning_roots(n, full, &adj, &indeg, p, &mut acc);
    }
    (acc, mass)
}

/// Adds `p` to every node that reaches all nodes through `adj`.
fn credit_spanning_roots(n: usize, full: u64, adj: &[u64], indeg: &[u32], p: f64, acc: &mut [f64]) {
    let mut orphan = None;
    for (v, &d) in indeg.iter().enumerate().take(n) {
        if d == 0 {
            if orphan.is_some() {
                return;
            }
            orphan = Some(v);
        }
    }
    let reach_all = |r: usize| {
        let mut seen = 1u64 << r;
        let mut frontier = seen;
        while frontier != 0 {
            let mut next = 0u64;
            let mut f = frontier;
            while f != 0 {
                let u = f.trailing_zeros() as usize;
                f &= f - 1;
                next |= adj[u];
            }
            frontier = next & !seen;
            seen |= next;
        }
        seen == full
    };
    match orphan {
        Some(r) => {
            if reach_all(r) {
                acc[r] += p;
            }
        }
        None => {
            for (r, a) in acc.iter_mut().enumerate() {
                if reach_all(r) {
                    *a += p;
                }
            }
        }
    }
}

/// Orientation of a rooted spanning tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Edges point away from the root.
    Out,
    /// Edges point toward the root.
    In,
}

/// A spanning tree as a parent array (`None` at the root) plus its weight.
///
/// For out-trees `parent[v]` is the tail of the edge into `v`; for in-trees
/// it is the head of the edge leaving `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct RootedTree {
    pub parent: Vec<Option<usize>>,
    pub weight: f64,
}

/// All spanning arborescences of `(n, edges)` rooted at `root`. Self loops
/// are ignored.
pub fn enumerate_arborescences(
    n: usize,
    edges: &[(usize, usize, f64)],
    root: usize,
    direction: Direction,
) -> Result<Vec<RootedTree>> {
    if n > MAX_ENUMERATION_NODES {
        return Err(Error::Capacity {
            what: "node count for tree enumeration",
            limit: MAX_ENUMERATION_NODES,
            got: n,
        });
    }
    if root >= n {
        return Err(Error::UnknownNode(root));
    }
    // choices[v]: (link, weight) where link is the tree neighbor toward the root.
    let mut choices: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(s, d, w) in edges {
        if s == d || w == 0.0 {
            continue;
        }
        match direction {
            Direction::Out => choices[d].push((s, w)),
            Direction::In => choices[s].push((d, w)),
        }
    }
    let order: Vec<usize> = (0..n).filter(|&v| v != root).collect();
    let mut link: Vec<Option<usize>> = vec![None; n];
    let mut out = Vec::new();
    extend_tree(&order, 0, &choices, &mut link, 1.0, &mut out);
    Ok(out)
}

fn extend_tree(
    order: &[usize],
    depth: usize,
    choices: &[Vec<(usize, f64)>],
    link: &mut Vec<Option<usize>>,
    weight: f64,
    out: &mut Vec<RootedTree>,
) {
    if depth == order.len() {
        out.push(RootedTree {
            parent: link.clone(),
            weight,
        });
        return;
    }
    let v = order[depth];
    for &(u, w) in &choices[v] {
        // Reject if following links from u returns to v.
        let mut x = Some(u);
        let mut cycle = false;
        while let Some(y) = x {
            if y == v {
                cycle = true;
                break;
            }
            x = link[y];
        }
        if cycle {
            continue;
        }
        link[v] = Some(u);
        extend_tree(order, depth + 1, choices, link, weight * w, out);
        link[v] = None;
    }
}

fn graph_edges(g: &WeightedDigraph) -> Vec<(usize, usize, f64)> {
    g.edges().iter().map(|e| (e.src, e.dst, e.p)).collect()
}

/// Spanning out-trees of `g` rooted at `root`.
pub fn enumerate_out_trees(g: &WeightedDigraph, root: usize) -> Result<Vec<RootedTree>> {
    enumerate_arborescences(g.node_count(), &graph_edges(g), root, Direction::Out)
}

/// Per-root sums of spanning out-tree weights.
pub fn gamma_exact(g: &WeightedDigraph) -> Result<Vec<f64>> {
    let edges = graph_edges(g);
    (0..g.node_count())
        .map(|r| {
            enumerate_arborescences(g.node_count(), &edges, r, Direction::Out)
                .map(|ts| ts.iter().map(|t| t.weight).sum())
        })
        .collect()
}

/// Per-root sums of spanning arborescence weights over a generic edge list.
pub fn tree_sums_by_enumeration(
    n: usize,
    edges: &[(usize, usize, f64)],
    direction: Direction,
) -> Result<Vec<f64>> {
    (0..n)
        .map(|r| {
            enumerate_arborescences(n, edges, r, direction)
                .map(|ts| ts.iter().map(|t| t.weight).sum())
        })
        .collect()
}

/// Natural log of the arborescence weight sum, or `None` when no spanning
/// arborescence exists.
///
/// The sum is the determinant of the weighted Laplacian with the root's row
/// and column removed. For out-trees the Laplacian has `w_in` on the
/// diagonal; for in-trees, `w_out`.
pub fn arborescence_log_weight_sum(
    n: usize,
    edges: &[(usize, usize, f64)],
    root: usize,
    direction: Direction,
) -> Result<Option<f64>> {
    if root >= n {
        return Err(Error::UnknownNode(root));
    }
    if !spans_from(n, edges, root, direction) {
        return Ok(None);
    }
    if n == 1 {
        return Ok(Some(0.0));
    }
    let idx = |v: usize| if v < root { v } else { v - 1 };
    let m = n - 1;
    let mut lap = vec![0.0; m * m];
    for &(s, d, w) in edges {
        if s == d {
            continue;
        }
        // Out: column d gets the in-weight. In: row s gets the out-weight.
        let diag = match direction {
            Direction::Out => d,
            Direction::In => s,
        };
        if diag != root {
            lap[idx(diag) * m + idx(diag)] += w;
        }
        if s != root && d != root {
            lap[idx(s) * m + idx(d)] -= w;
        }
    }
    let log_bound: f64 = (0..m)
        .map(|r| {
            lap[r * m..(r + 1) * m]
                .iter()
                .fold(0.0f64, |a, x| a.max(x.abs()))
                .ln()
        })
        .sum();
    let (sign, log_det) = Lu::factor(m, lap).log_det();
    if sign <= 0.0 || log_det < log_bound + 1e-12f64.ln() {
        return Err(Error::Numerical(format!(
            "Laplacian minor for root {root} is numerically singular"
        )));
    }
    Ok(Some(log_det))
}

/// Weight sum of spanning in- or out-trees rooted at `root`.
pub fn arborescence_weight_sum(
    g: &WeightedDigraph,
    root: usize,
    direction: Direction,
) -> Result<f64> {
    let edges = graph_edges(g);
    Ok(arborescence_log_weight_sum(g.node_count(), &edges, root, direction)?.map_or(0.0, f64::exp))
}

/// Whether `root` reaches every node (out) or every node reaches `root` (in).
fn spans_from(n: usize, edges: &[(usize, usize, f64)], root: usize, direction: Direction) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(s, d, w) in edges {
        if s == d || w == 0.0 {
            continue;
        }
        match direction {
            Direction::Out => adj[s].push(d),
            Direction::In => adj[d].push(s),
        }
    }
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut stack = vec![root];
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == n
}
