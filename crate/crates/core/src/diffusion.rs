//! Independent Cascade simulation from a single source.
//!
//! Every activation attempt of `parent` on `child` in round `t` reads one
//! keyed uniform `attempt_uniform(seed, t, parent, child)`, so a cascade is a
//! pure function of `(graph, source, seed)` regardless of visiting order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightedDigraph;
use crate::seed::attempt_uniform;

/// Outcome of one diffusion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cascade {
    pub source: usize,
    /// `rounds[t]` holds the nodes activated in round `t`, ascending;
    /// `rounds[0] == [source]`.
    pub rounds: Vec<Vec<usize>>,
    /// `(parent, child)` edges that carried a successful activation.
    pub edges: Vec<(usize, usize)>,
}

/// Order in which a round's attempts are made.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttemptOrder {
    #[default]
    Ascending,
    Descending,
}

impl Cascade {
    /// Active set `A`, ascending.
    pub fn active(&self) -> Vec<usize> {
        let mut a: Vec<usize> = self.rounds.iter().flatten().copied().collect();
        a.sort_unstable();
        a
    }

    pub fn active_count(&self) -> usize {
        self.rounds.iter().map(Vec::len).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("cascade serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Checks the out-tree and round structure against `g`.
    pub fn validate(&self, g: &WeightedDigraph) -> Result<()> {
        let bad = |m: String| Err(Error::InconsistentCascade(m));
        if !g.contains(self.source) {
            return bad(format!("source {} not in graph", self.source));
        }
        if self.rounds.first().map(Vec::as_slice) != Some(&[self.source][..]) {
            return bad("round 0 must hold exactly the source".into());
        }
        let n = g.node_count();
        let mut round_of = vec![usize::MAX; n];
        for (t, round) in self.rounds.iter().enumerate() {
            if t > 0 && round.is_empty() {
                return bad(format!("round {t} is empty"));
            }
            for &v in round {
                if v >= n {
                    return bad(format!("node {v} not in graph"));
                }
                if round_of[v] != usize::MAX {
                    return bad(format!("node {v} activated twice"));
                }
                round_of[v] = t;
            }
        }
        let mut parent = vec![usize::MAX; n];
        for &(p, c) in &self.edges {
            if p >= n || c >= n || g.weight(p, c).is_none() {
                return bad(format!("edge ({p}, {c}) not in graph"));
            }
            if round_of[c] == usize::MAX || round_of[p] == usize::MAX {
                return bad(format!("edge ({p}, {c}) touches an inactive node"));
            }
            if round_of[c] != round_of[p] + 1 {
                return bad(format!("edge ({p}, {c}) does not span consecutive rounds"));
            }
            if parent[c] != usize::MAX {
                return bad(format!("node {c} has two parents"));
            }
            parent[c] = p;
        }
        if self.edges.len() + 1 != self.active_count() {
            return bad("every active non-source node needs exactly one parent".into());
        }
        Ok(())
    }
}

/// Reusable scratch space for repeated simulations on graphs of one size.
#[derive(Debug, Default)]
pub struct Simulator {
    stamp: Vec<u32>,
    epoch: u32,
    frontier: Vec<usize>,
    next: Vec<usize>,
}

impl Simulator {
    pub fn new() -> Self {
        Self::default()
    }

    fn begin(&mut self, n: usize) {
        if self.stamp.len() != n {
            self.stamp = vec![0; n];
            self.epoch = 0;
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }

    /// Size of the active set of one cascade, without recording the tree.
    pub fn active_count(&mut self, g: &WeightedDigraph, source: usize, seed: u64) -> usize {
        self.begin(g.node_count());
        let epoch = self.epoch;
        self.stamp[source] = epoch;
        self.frontier.clear();
        self.frontier.push(source);
        let mut count = 1;
        let mut round = 0u32;
        while !self.frontier.is_empty() {
            round += 1;
            self.next.clear();
            for &u in &self.frontier {
                for e in g.out_edges(u) {
                    if self.stamp[e.dst] != epoch && attempt_uniform(seed, round, u, e.dst) < e.p {
                        self.stamp[e.dst] = epoch;
                        self.next.push(e.dst);
                    }
                }
            }
            count += self.next.len();
            std::mem::swap(&mut self.frontier, &mut self.next);
        }
        count
    }

    pub fn simulate(
        &mut self,
        g: &WeightedDigraph,
        source: usize,
        seed: u64,
        order: AttemptOrder,
    ) -> Result<Cascade> {
        if !g.contains(source) {
            return Err(Error::UnknownNode(source));
        }
        self.begin(g.node_count());
        let epoch = self.epoch;
        self.stamp[source] = epoch;
        let mut rounds = vec![vec![source]];
        let mut edges = Vec::new();
        let mut round = 0u32;
        loop {
            round += 1;
            let frontier = rounds.last().expect("nonempty");
            let mut fresh = Vec::new();
            let mut attempt = |u: usize, v: usize, p: f64, fresh: &mut Vec<usize>| {
                if self.stamp[v] != epoch && attempt_uniform(seed, round, u, v) < p {
                    self.stamp[v] = epoch;
                    edges.push((u, v));
                    fresh.push(v);
                }
            };
            match order {
                AttemptOrder::Ascending => {
                    for &u in frontier {
                        for e in g.out_edges(u) {
                            attempt(u, e.dst, e.p, &mut fresh);
                        }
                    }
                }
                AttemptOrder::Descending => {
                    for &u in frontier.iter().rev() {
                        for e in g.out_edges(u).iter().rev() {
                            attempt(u, e.dst, e.p, &mut fresh);
                        }
                    }
                }
            }
            if fresh.is_empty() {
                break;
            }
            fresh.sort_unstable();
            rounds.push(fresh);
        }
        Ok(Cascade {
            source,
            rounds,
            edges,
        })
    }
}

/// Runs one IC diffusion from `source`.
pub fn simulate_ic(g: &WeightedDigraph, source: usize, seed: u64) -> Result<Cascade> {
    Simulator::new().simulate(g, source, seed, AttemptOrder::Ascending)
}

/// Weight of the realized activation out-tree: the product of its edge
/// weights (1 for a singleton cascade).
pub fn activation_probability_trace(c: &Cascade, g: &WeightedDigraph) -> Result<f64> {
    c.validate(g)?;
    Ok(c.edges
        .iter()
        .map(|&(p, ch)| g.weight(p, ch).expect("validated"))
        .product())
}
