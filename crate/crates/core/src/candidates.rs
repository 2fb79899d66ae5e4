//! Candidate sources: active nodes that reach every active node.
//!
//! Reachability is evaluated inside the subgraph induced by the active set.
//! The candidates are exactly the unique source component of the
//! condensation of that subgraph, when such a component exists.

use crate::error::{Error, Result};
use crate::graph::{Subgraph, WeightedDigraph};

/// Strongly connected components by an iterative Tarjan.
///
/// Components are returned in reverse topological order of the
/// condensation (sinks first), each sorted ascending; `comp[v]` gives the
/// component index of `v`.
pub fn strongly_connected_components(
    n: usize,
    successors: impl Fn(usize) -> Vec<usize>,
) -> (Vec<Vec<usize>>, Vec<usize>) {
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut comp = vec![UNSEEN; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut counter = 0usize;
    // (node, its successor list, next position)
    let mut call: Vec<(usize, Vec<usize>, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        call.push((root, successors(root), 0));

        while let Some(frame) = call.last_mut() {
            let v = frame.0;
            if frame.2 < frame.1.len() {
                let w = frame.1[frame.2];
                frame.2 += 1;
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, successors(w), 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(parent) = call.last() {
                let p = parent.0;
                low[p] = low[p].min(low[v]);
            }
            if low[v] == index[v] {
                let id = comps.len();
                let mut members = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp[w] = id;
                    members.push(w);
                    if w == v {
                        break;
                    }
                }
                members.sort_unstable();
                comps.push(members);
            }
        }
    }
    (comps, comp)
}

pub fn graph_components(g: &WeightedDigraph) -> (Vec<Vec<usize>>, Vec<usize>) {
    strongly_connected_components(g.node_count(), |v| {
        g.out_edges(v).iter().map(|e| e.dst).collect()
    })
}

pub fn is_strongly_connected(g: &WeightedDigraph) -> bool {
    g.node_count() <= 1 || graph_components(g).0.len() == 1
}

/// The candidate set `A'` together with the induced subgraphs it lives in.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    /// Candidate ids in the original graph, ascending.
    pub nodes: Vec<usize>,
    pub is_singleton: bool,
    /// `G[A]`, ids mapped back to the original graph.
    pub active: Subgraph,
    /// `G[A']`, ids mapped back to the original graph.
    pub induced: Subgraph,
    /// Candidate ids within `active.graph`, ascending.
    pub in_active: Vec<usize>,
    /// Whether `G[A']` itself is strongly connected.
    pub strongly_connected: bool,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.nodes.binary_search(&v).is_ok()
    }

    pub fn active_count(&self) -> usize {
        self.active.to_parent.len()
    }
}

/// Computes `A'` for the active set `active` of graph `g`.
pub fn candidate_set(g: &WeightedDigraph, active: &[usize]) -> Result<CandidateSet> {
    if active.is_empty() {
        return Err(Error::EmptyActiveSet);
    }
    let sub = g.induced_subgraph(active)?;
    let ga = &sub.graph;
    let (comps, comp) = graph_components(ga);

    let mut has_incoming = vec![false; comps.len()];
    for e in ga.edges() {
        if comp[e.src] != comp[e.dst] {
            has_incoming[comp[e.dst]] = true;
        }
    }
    let sources: Vec<usize> = (0..comps.len()).filter(|&c| !has_incoming[c]).collect();
    if sources.len() != 1 {
        return Err(Error::NoCandidates);
    }
    // A DAG with a single source component is reachable from it entirely.
    let in_active = comps[sources[0]].clone();
    let nodes: Vec<usize> = in_active.iter().map(|&v| sub.to_parent[v]).collect();
    let mut induced = g.induced_subgraph(&nodes)?;
    induced.to_parent = nodes.clone();
    let strongly_connected = is_strongly_connected(&induced.graph);
    Ok(CandidateSet {
        is_singleton: nodes.len() == 1,
        nodes,
        active: sub,
        induced,
        in_active,
        strongly_connected,
    })
}
