//! Weighted directed graphs with influence probabilities on the edges.
//!
//! Nodes are dense `0..n` ids. Edges are stored once, sorted by
//! `(src, dst)`, with CSR offsets for out-adjacency and a permutation index
//! for in-adjacency, so both views always agree edge-for-edge.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub p: f64,
}

#[derive(Debug, Clone)]
pub struct WeightedDigraph {
    n: usize,
    edges: Vec<Edge>,
    out_offsets: Vec<usize>,
    in_offsets: Vec<usize>,
    /// Edge indices ordered by `(dst, src)`.
    in_order: Vec<usize>,
    labels: Option<Arc<Vec<String>>>,
}

impl WeightedDigraph {
    /// Builds a graph over nodes `0..n`, validating every invariant.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut edges: Vec<Edge> = edges
            .into_iter()
            .map(|(src, dst, p)| Edge { src, dst, p })
            .collect();
        for e in &edges {
            if e.src >= n {
                return Err(Error::UnknownNode(e.src));
            }
            if e.dst >= n {
                return Err(Error::UnknownNode(e.dst));
            }
            if e.src == e.dst {
                return Err(Error::SelfLoop(e.src.to_string()));
            }
            if !(e.p > 0.0 && e.p <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "edge {} -> {} has weight {} outside (0, 1]",
                    e.src, e.dst, e.p
                )));
            }
        }
        edges.sort_by_key(|e| (e.src, e.dst));
        if let Some(w) = edges
            .windows(2)
            .find(|w| w[0].src == w[1].src && w[0].dst == w[1].dst)
        {
            return Err(Error::DuplicateEdge {
                src: w[0].src.to_string(),
                dst: w[0].dst.to_string(),
            });
        }
        Ok(Self::from_sorted(n, edges, None))
    }

    /// Caller guarantees validity and `(src, dst)` order.
    fn from_sorted(n: usize, edges: Vec<Edge>, labels: Option<Arc<Vec<String>>>) -> Self {
        let mut out_offsets = vec![0usize; n + 1];
        let mut in_offsets = vec![0usize; n + 1];
        for e in &edges {
            out_offsets[e.src + 1] += 1;
            in_offsets[e.dst + 1] += 1;
        }
        for v in 0..n {
            out_offsets[v + 1] += out_offsets[v];
            in_offsets[v + 1] += in_offsets[v];
        }
        let mut cursor = in_offsets.clone();
        let mut in_order = vec![0usize; edges.len()];
        // Edges are sorted by src, so each in-list comes out sorted by src.
        for (idx, e) in edges.iter().enumerate() {
            in_order[cursor[e.dst]] = idx;
            cursor[e.dst] += 1;
        }
        WeightedDigraph {
            n,
            edges,
            out_offsets,
            in_offsets,
            in_order,
            labels,
        }
    }

    /// Attaches external labels, one per node.
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::InvalidParameter(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(Arc::new(labels));
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// All edges in `(src, dst)` order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn out_edges(&self, v: usize) -> &[Edge] {
        &self.edges[self.out_offsets[v]..self.out_offsets[v + 1]]
    }

    /// Incoming edges of `v` in ascending `src` order.
    pub fn in_edges(&self, v: usize) -> impl ExactSizeIterator<Item = &Edge> + '_ {
        self.in_order[self.in_offsets[v]..self.in_offsets[v + 1]]
            .iter()
            .map(move |&i| &self.edges[i])
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.out_offsets[v + 1] - self.out_offsets[v]
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.in_offsets[v + 1] - self.in_offsets[v]
    }

    pub fn weight(&self, src: usize, dst: usize) -> Option<f64> {
        if src >= self.n {
            return None;
        }
        let out = self.out_edges(src);
        out.binary_search_by_key(&dst, |e| e.dst)
            .ok()
            .map(|i| out[i].p)
    }

    pub fn contains(&self, v: usize) -> bool {
        v < self.n
    }

    fn check_node(&self, v: usize) -> Result<()> {
        if v < self.n {
            Ok(())
        } else {
            Err(Error::UnknownNode(v))
        }
    }

    /// `w_in(v)`: the sum of incoming edge weights.
    pub fn weighted_in_degree(&self, v: usize) -> Result<f64> {
        self.check_node(v)?;
        Ok(self.in_edges(v).map(|e| e.p).sum())
    }

    /// `w_out(v)`: the sum of outgoing edge weights.
    pub fn weighted_out_degree(&self, v: usize) -> Result<f64> {
        self.check_node(v)?;
        Ok(self.out_edges(v).iter().map(|e| e.p).sum())
    }

    pub fn weighted_in_degrees(&self) -> Vec<f64> {
        (0..self.n)
            .map(|v| self.in_edges(v).map(|e| e.p).sum())
            .collect()
    }

    pub fn weighted_out_degrees(&self) -> Vec<f64> {
        (0..self.n)
            .map(|v| self.out_edges(v).iter().map(|e| e.p).sum())
            .collect()
    }

    pub fn mean_weighted_out_degree(&self) -> f64 {
        self.edges.iter().map(|e| e.p).sum::<f64>() / self.n as f64
    }

    /// External label of `v`, falling back to the numeric id.
    pub fn label(&self, v: usize) -> String {
        match &self.labels {
            Some(l) => l[v].clone(),
            None => v.to_string(),
        }
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref().map(Vec::as_slice)
    }

    /// Looks up a node by external label (or by numeric id when unlabeled).
    pub fn node_by_label(&self, label: &str) -> Option<usize> {
        match &self.labels {
            Some(l) => l.iter().position(|x| x == label),
            None => label.parse().ok().filter(|&v| v < self.n),
        }
    }

    /// Same topology with every weight passed through `f`.
    pub fn map_weights(&self, mut f: impl FnMut(&Edge) -> f64) -> Result<Self> {
        let edges = self.edges.iter().map(|e| (e.src, e.dst, f(e)));
        let g = WeightedDigraph::from_edges(self.n, edges)?;
        Ok(WeightedDigraph {
            labels: self.labels.clone(),
            ..g
        })
    }

    /// Subgraph induced by `nodes`; new ids follow ascending old ids.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Subgraph> {
        let mut to_parent: Vec<usize> = nodes.to_vec();
        to_parent.sort_unstable();
        to_parent.dedup();
        let mut to_child = vec![usize::MAX; self.n];
        for (new, &old) in to_parent.iter().enumerate() {
            self.check_node(old)?;
            to_child[old] = new;
        }
        let mut edges = Vec::new();
        for &old in &to_parent {
            for e in self.out_edges(old) {
                let dst = to_child[e.dst];
                if dst != usize::MAX {
                    edges.push(Edge {
                        src: to_child[old],
                        dst,
                        p: e.p,
                    });
                }
            }
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| Arc::new(to_parent.iter().map(|&v| l[v].clone()).collect()));
        let graph = WeightedDigraph::from_sorted(to_parent.len(), edges, labels);
        Ok(Subgraph { graph, to_parent })
    }

    /// Order-sensitive 64-bit fingerprint of nodes, edges and weights.
    pub fn fingerprint(&self) -> u64 {
        let mut bytes = Vec::with_capacity(8 + self.edges.len() * 24);
        bytes.extend_from_slice(&(self.n as u64).to_le_bytes());
        for e in &self.edges {
            bytes.extend_from_slice(&(e.src as u64).to_le_bytes());
            bytes.extend_from_slice(&(e.dst as u64).to_le_bytes());
            bytes.extend_from_slice(&e.p.to_bits().to_le_bytes());
        }
        seed::fnv1a(&bytes)
    }
}

/// An induced subgraph plus the map from its ids back to the parent graph.
#[derive(Debug, Clone)]
pub struct Subgraph {
    pub graph: WeightedDigraph,
    pub to_parent: Vec<usize>,
}

impl Subgraph {
    /// Child id of a parent node, if it belongs to the subgraph.
    pub fn child_of(&self, parent: usize) -> Option<usize> {
        self.to_parent.binary_search(&parent).ok()
    }
}

/// Parameters of a directed Erdős–Rényi graph with uniform edge weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomGraphParams {
    pub n: usize,
    pub density: f64,
    pub p_range: f64,
    #[serde(default)]
    pub seed: u64,
}

impl RandomGraphParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("n = {} < 2", self.n)));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "density {} outside (0, 1]",
                self.density
            )));
        }
        if !(self.p_range > 0.0 && self.p_range <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "p_range {} outside (0, 1]",
                self.p_range
            )));
        }
        Ok(())
    }
}

/// Samples a random weighted digraph.
///
/// Ordered pairs are visited in `(i, j)` order; each consumes one uniform
/// for edge presence and, when present, one more for the weight, drawn
/// from `(0, p_range]`.
pub fn generate_random_graph(params: &RandomGraphParams) -> Result<WeightedDigraph> {
    params.validate()?;
    let n = params.n;
    let mut rng = seed::stream(params.seed);
    let expected = (n as f64 * (n - 1) as f64 * params.density * 1.05) as usize;
    let mut edges = Vec::with_capacity(expected);
    for src in 0..n {
        for dst in 0..n {
            if src == dst {
                continue;
            }
            if rng.gen::<f64>() < params.density {
                let p = params.p_range * (1.0 - rng.gen::<f64>());
                edges.push(Edge { src, dst, p });
            }
        }
    }
    Ok(WeightedDigraph::from_sorted(n, edges, None))
}

/// A parsed edge list whose weights may be missing.
#[derive(Debug, Clone)]
pub struct EdgeList {
    pub labels: Vec<String>,
    pub edges: Vec<(usize, usize, Option<f64>)>,
}

impl EdgeList {
    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn is_weighted(&self) -> bool {
        self.edges.iter().all(|e| e.2.is_some())
    }

    /// Converts to a graph; every edge must carry a weight.
    pub fn into_weighted(self) -> Result<WeightedDigraph> {
        let mut edges = Vec::with_capacity(self.edges.len());
        for &(s, d, w) in &self.edges {
            match w {
                Some(p) => edges.push((s, d, p)),
                None => {
                    return Err(Error::MissingWeight {
                        src: self.labels[s].clone(),
                        dst: self.labels[d].clone(),
                    })
                }
            }
        }
        WeightedDigraph::from_edges(self.labels.len(), edges)?.with_labels(self.labels)
    }
}

impl From<&WeightedDigraph> for EdgeList {
    fn from(g: &WeightedDigraph) -> Self {
        EdgeList {
            labels: (0..g.node_count()).map(|v| g.label(v)).collect(),
            edges: g
                .edges()
                .iter()
                .map(|e| (e.src, e.dst, Some(e.p)))
                .collect(),
        }
    }
}

/// Parses `src dst [weight]` lines; `#` lines and blank lines are skipped.
///
/// When every label is a non-negative integer, dense ids follow numeric
/// order; otherwise they follow first appearance.
pub fn load_edge_list(text: &str) -> Result<EdgeList> {
    let mut raw: Vec<(&str, &str, Option<f64>)> = Vec::new();
    let mut seen: HashSet<(&str, &str)> = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let weight = match fields.len() {
            2 => None,
            3 => {
                let w: f64 = fields[2]
                    .parse()
                    .map_err(|_| parse_err(format!("bad weight {:?}", fields[2])))?;
                if !(w > 0.0 && w <= 1.0) {
                    return Err(parse_err(format!("weight {w} outside (0, 1]")));
                }
                Some(w)
            }
            k => return Err(parse_err(format!("expected 2 or 3 fields, found {k}"))),
        };
        let (src, dst) = (fields[0], fields[1]);
        if src == dst {
            return Err(Error::SelfLoop(src.to_string()));
        }
        if !seen.insert((src, dst)) {
            return Err(Error::DuplicateEdge {
                src: src.to_string(),
                dst: dst.to_string(),
            });
        }
        raw.push((src, dst, weight));
    }
    if raw.is_empty() {
        return Err(Error::EmptyGraph);
    }

    let mut labels: Vec<&str> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for &(s, d, _) in &raw {
        for l in [s, d] {
            if !index.contains_key(l) {
                index.insert(l, labels.len());
                labels.push(l);
            }
        }
    }
    let numeric: Option<Vec<u64>> = labels.iter().map(|l| l.parse::<u64>().ok()).collect();
    if let Some(nums) = numeric {
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.sort_by_key(|&i| nums[i]);
        labels = order.iter().map(|&i| labels[i]).collect();
        index = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    }
    Ok(EdgeList {
        labels: labels.iter().map(|s| s.to_string()).collect(),
        edges: raw
            .into_iter()
            .map(|(s, d, w)| (index[s], index[d], w))
            .collect(),
    })
}

/// Loads a fully weighted graph.
pub fn parse_weighted(text: &str) -> Result<WeightedDigraph> {
    load_edge_list(text)?.into_weighted()
}

/// Writes one `src dst weight` line per edge using external labels.
///
/// Weights use the shortest representation that parses back to the
/// identical `f64`.
pub fn serialize_edge_list(g: &WeightedDigraph) -> String {
    let mut out = String::with_capacity(g.edge_count() * 16);
    for e in g.edges() {
        let _ = writeln!(out, "{} {} {}", g.label(e.src), g.label(e.dst), e.p);
    }
    out
}

/// Assigns uniform random weights so that the mean weighted out-degree is
/// close to `target_mean_wout`.
///
/// Weights are drawn from `(0, p_range]` with
/// `p_range = 2 * target * n / |E|`. When that exceeds 1 the draw range is
/// shifted to `(p_range - 1, 1]`, which keeps the same mean. If the realized
/// mean misses the target by more than 5%, all weights are rescaled once
/// (capped at 1).
pub fn assign_weights(
    topology: &EdgeList,
    target_mean_wout: f64,
    seed: u64,
) -> Result<WeightedDigraph> {
    if !(target_mean_wout > 0.0 && target_mean_wout.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "target mean weighted out-degree {target_mean_wout} must be positive"
        )));
    }
    let n = topology.node_count();
    let m = topology.edges.len();
    if m == 0 {
        return Err(Error::EmptyGraph);
    }
    let p_range = 2.0 * target_mean_wout * n as f64 / m as f64;
    if p_range > 2.0 + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "target {target_mean_wout} unreachable: even all-one weights give {}",
            m as f64 / n as f64
        )));
    }
    let (lo, hi) = if p_range <= 1.0 {
        (0.0, p_range)
    } else {
        ((p_range - 1.0).min(1.0), 1.0)
    };
    let mut rng = seed::stream(seed);
    let mut weights: Vec<f64> = (0..m).map(|_| hi - (hi - lo) * rng.gen::<f64>()).collect();
    let realized = weights.iter().sum::<f64>() / n as f64;
    if (realized - target_mean_wout).abs() > 0.05 * target_mean_wout {
        let scale = target_mean_wout / realized;
        for w in &mut weights {
            *w = (*w * scale).min(1.0);
        }
    }
    let edges = topology
        .edges
        .iter()
        .zip(&weights)
        .map(|(&(s, d, _), &w)| (s, d, w));
    WeightedDigraph::from_edges(n, edges)?.with_labels(topology.labels.clone())
}
