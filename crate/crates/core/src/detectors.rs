//! Source detectors behind one interface.
//!
//! Every detector scores the candidate set `A'` only and returns a
//! [`ScoreVector`] whose node ids refer to the input graph.

use std::cell::OnceCell;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidates::{candidate_set, CandidateSet};
use crate::chain::{convert, MarkovChain, Scheme};
use crate::diffusion::Simulator;
use crate::error::{Error, Result};
use crate::graph::WeightedDigraph;
use crate::oracles::{arborescence_log_weight_sum, Direction};
use crate::seed;
use crate::stationary::{self, stationary_direct, stationary_random_walks, ScoreVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SelfLoops,
    NoLoops,
    Naive,
    Random,
    MaxOutDeg,
    MinInDeg,
    MaxOutInRatio,
    ImBased,
    MaxArborescence,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::SelfLoops,
        Method::NoLoops,
        Method::Naive,
        Method::Random,
        Method::MaxOutDeg,
        Method::MinInDeg,
        Method::MaxOutInRatio,
        Method::ImBased,
        Method::MaxArborescence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::SelfLoops => "self_loops",
            Method::NoLoops => "no_loops",
            Method::Naive => "naive",
            Method::Random => "random",
            Method::MaxOutDeg => "max_out_deg",
            Method::MinInDeg => "min_in_deg",
            Method::MaxOutInRatio => "max_out_in_ratio",
            Method::ImBased => "im_based",
            Method::MaxArborescence => "max_arborescence",
        }
    }

    /// Universe used when a spec leaves it unset: `G[A]` for the IM
    /// baseline, the full graph for the degree baselines.
    pub fn default_universe(self) -> Universe {
        match self {
            Method::ImBased => Universe::Active,
            Method::MaxOutDeg | Method::MinInDeg | Method::MaxOutInRatio => Universe::Full,
            _ => Universe::Candidates,
        }
    }

    /// The chain scheme for the three Markov-chain methods.
    pub fn scheme(self) -> Option<Scheme> {
        match self {
            Method::SelfLoops => Some(Scheme::SelfLoops),
            Method::NoLoops => Some(Scheme::NoLoops),
            Method::Naive => Some(Scheme::Naive),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum StationaryMode {
    #[default]
    Direct,
    RandomWalk {
        steps: u64,
    },
}

impl StationaryMode {
    pub fn steps(self) -> Option<u64> {
        match self {
            StationaryMode::Direct => None,
            StationaryMode::RandomWalk { steps } => Some(steps),
        }
    }
}

/// Graph on which a baseline measures degrees or simulates cascades.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Universe {
    /// `G[A]`.
    Active,
    /// `G[A']`.
    Candidates,
    /// The whole input graph.
    Full,
}

impl Universe {
    pub fn as_str(self) -> &'static str {
        match self {
            Universe::Active => "active",
            Universe::Candidates => "candidates",
            Universe::Full => "full",
        }
    }
}

fn default_im_simulations() -> u32 {
    1000
}

fn default_walks() -> u32 {
    1
}

mod steps_field {
    use super::StationaryMode;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(mode: &StationaryMode, s: S) -> Result<S::Ok, S::Error> {
        mode.steps().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<StationaryMode, D::Error> {
        Ok(match Option::<u64>::deserialize(d)? {
            None => StationaryMode::Direct,
            Some(steps) => StationaryMode::RandomWalk { steps },
        })
    }
}

/// One detector configuration. `steps` absent means a direct solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub method: Method,
    #[serde(
        rename = "steps",
        default,
        with = "steps_field",
        skip_serializing_if = "is_direct"
    )]
    pub mode: StationaryMode,
    /// Independent walks whose visit counts are summed.
    #[serde(default = "default_walks")]
    pub walks: u32,
    #[serde(default = "default_im_simulations")]
    pub im_simulations: u32,
    /// Only read by the degree and IM baselines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub universe: Option<Universe>,
    #[serde(default)]
    pub seed: u64,
}

fn is_direct(mode: &StationaryMode) -> bool {
    *mode == StationaryMode::Direct
}

impl DetectorSpec {
    pub fn new(method: Method) -> Self {
        DetectorSpec {
            method,
            mode: StationaryMode::Direct,
            walks: 1,
            im_simulations: default_im_simulations(),
            universe: None,
            seed: 0,
        }
    }

    pub fn random_walk(method: Method, steps: u64) -> Self {
        DetectorSpec {
            mode: StationaryMode::RandomWalk { steps },
            ..DetectorSpec::new(method)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn universe(&self) -> Universe {
        self.universe.unwrap_or(self.method.default_universe())
    }

    /// Identifier such as `no_loops`, `no_loops@1000` or
    /// `min_in_deg[candidates]` (universe shown only when not the default).
    pub fn label(&self) -> String {
        let mut label = match (self.method.scheme(), self.mode) {
            (Some(_), StationaryMode::RandomWalk { steps }) => format!("{}@{steps}", self.method),
            _ => self.method.to_string(),
        };
        if self.uses_universe() && self.universe() != self.method.default_universe() {
            label = format!("{label}[{}]", self.universe().as_str());
        }
        label
    }

    fn uses_universe(&self) -> bool {
        matches!(
            self.method,
            Method::ImBased | Method::MaxOutDeg | Method::MinInDeg | Method::MaxOutInRatio
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.im_simulations == 0 {
            return Err(Error::InvalidParameter(
                "im_simulations must be at least 1".into(),
            ));
        }
        if self.walks == 0 {
            return Err(Error::InvalidParameter("walks must be at least 1".into()));
        }
        if let StationaryMode::RandomWalk { steps: 0 } = self.mode {
            return Err(Error::InvalidParameter(
                "random walk needs at least one step".into(),
            ));
        }
        Ok(())
    }
}

/// Per-trial state shared by detectors: the candidate set and lazily built
/// chains, so random-walk variants of one scheme reuse one chain.
pub struct TrialContext<'g> {
    pub graph: &'g WeightedDigraph,
    pub candidates: CandidateSet,
    chains: [OnceCell<MarkovChain>; 3],
}

impl<'g> TrialContext<'g> {
    pub fn new(graph: &'g WeightedDigraph, active: &[usize]) -> Result<Self> {
        Ok(Self::from_candidates(graph, candidate_set(graph, active)?))
    }

    pub fn from_candidates(graph: &'g WeightedDigraph, candidates: CandidateSet) -> Self {
        TrialContext {
            graph,
            candidates,
            chains: Default::default(),
        }
    }

    pub fn chain(&self, scheme: Scheme) -> Result<&MarkovChain> {
        let slot = &self.chains[scheme as usize];
        if let Some(mc) = slot.get() {
            return Ok(mc);
        }
        let mc = convert(&self.candidates.induced.graph, scheme)?;
        Ok(slot.get_or_init(|| mc))
    }

    pub fn detect(&self, spec: &DetectorSpec) -> Result<ScoreVector> {
        spec.validate()?;
        let cands = &self.candidates;
        if cands.is_singleton {
            return Ok(ScoreVector::one_hot(cands.nodes.clone(), 0));
        }
        let ga = &cands.induced.graph;
        let scores = match spec.method {
            Method::SelfLoops | Method::NoLoops | Method::Naive => {
                let scheme = spec.method.scheme().expect("chain method");
                self.chain_scores(scheme, spec)?
            }
            Method::Random => baseline_random(ga.node_count(), spec.seed),
            Method::MaxArborescence => baseline_max_arborescence(ga)?,
            Method::MaxOutDeg | Method::MinInDeg | Method::MaxOutInRatio | Method::ImBased => {
                let all: Vec<usize> = (0..ga.node_count()).collect();
                let (graph, ids) = match spec.universe() {
                    Universe::Active => (&cands.active.graph, cands.in_active.as_slice()),
                    Universe::Candidates => (ga, all.as_slice()),
                    Universe::Full => (self.graph, cands.nodes.as_slice()),
                };
                let sv = match spec.method {
                    Method::MaxOutDeg => baseline_degree_on(graph, ids, DegreeKind::MaxOut)?,
                    Method::MinInDeg => baseline_degree_on(graph, ids, DegreeKind::MinIn)?,
                    Method::MaxOutInRatio => baseline_degree_on(graph, ids, DegreeKind::MaxRatio)?,
                    _ => baseline_im(graph, ids, spec.im_simulations, spec.seed)?,
                };
                // Scores are in candidate order; ids become positions in A'.
                ScoreVector { nodes: all, ..sv }
            }
        };
        Ok(scores.relabel(&cands.induced.to_parent))
    }

    fn chain_scores(&self, scheme: Scheme, spec: &DetectorSpec) -> Result<ScoreVector> {
        let mc = self.chain(scheme)?;
        match spec.mode {
            StationaryMode::Direct => {
                if !mc.is_irreducible() {
                    let mut sv = arborescence_scores(&self.candidates.induced.graph)?;
                    sv.rerouted = true;
                    return Ok(sv);
                }
                let pi = stationary_direct(mc)?;
                stationary::score(mc, &pi)
            }
            StationaryMode::RandomWalk { steps } => {
                let pi = stationary_random_walks(mc, steps, spec.walks, spec.seed)?;
                stationary::score(mc, &pi)
            }
        }
    }
}

/// Runs one detector on graph `g` with active set `active`.
pub fn detect(g: &WeightedDigraph, active: &[usize], spec: &DetectorSpec) -> Result<ScoreVector> {
    TrialContext::new(g, active)?.detect(spec)
}

/// Out-tree weight sums via the matrix-tree determinant; needs no
/// irreducibility.
pub fn arborescence_scores(ga: &WeightedDigraph) -> Result<ScoreVector> {
    let edges: Vec<(usize, usize, f64)> = ga.edges().iter().map(|e| (e.src, e.dst, e.p)).collect();
    let n = ga.node_count();
    let logs = (0..n)
        .map(|r| {
            arborescence_log_weight_sum(n, &edges, r, Direction::Out)
                .map(|l| l.unwrap_or(f64::NEG_INFINITY))
        })
        .collect::<Result<Vec<f64>>>()?;
    ScoreVector::from_log((0..n).collect(), logs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegreeKind {
    MaxOut,
    MinIn,
    MaxRatio,
}

/// Degree heuristics with degrees measured in `ga` itself.
///
/// `MinIn` scores by rank (`1 + #nodes with larger w_in`), so the node with
/// the smallest in-degree gets the largest score.
pub fn baseline_degree(ga: &WeightedDigraph, kind: DegreeKind) -> Result<ScoreVector> {
    let all: Vec<usize> = (0..ga.node_count()).collect();
    baseline_degree_on(ga, &all, kind)
}

/// Degree heuristics for the nodes `ids` of `g`, degrees measured in `g`.
pub fn baseline_degree_on(
    g: &WeightedDigraph,
    ids: &[usize],
    kind: DegreeKind,
) -> Result<ScoreVector> {
    let nodes = ids.to_vec();
    let w_in = |v: usize| g.weighted_in_degree(v);
    let w_out = |v: usize| g.weighted_out_degree(v);
    match kind {
        DegreeKind::MaxOut => {
            ScoreVector::from_raw(nodes, ids.iter().map(|&v| w_out(v)).collect::<Result<_>>()?)
        }
        DegreeKind::MinIn => {
            let w: Vec<f64> = ids.iter().map(|&v| w_in(v)).collect::<Result<_>>()?;
            let ranks = w
                .iter()
                .map(|&x| 1.0 + w.iter().filter(|&&y| y > x).count() as f64)
                .collect();
            ScoreVector::from_raw(nodes, ranks)
        }
        DegreeKind::MaxRatio => {
            let mut ratio = Vec::with_capacity(ids.len());
            for &v in ids {
                let i = w_in(v)?;
                if i <= 0.0 {
                    return Err(Error::ZeroInDegree { node: v });
                }
                ratio.push(w_out(v)? / i);
            }
            ScoreVector::from_raw(nodes, ratio)
        }
    }
}

/// Picks one of `n` candidates uniformly.
pub fn baseline_random(n: usize, seed: u64) -> ScoreVector {
    let pick = seed::stream(seed).gen_range(0..n);
    ScoreVector::one_hot((0..n).collect(), pick)
}

/// Mean active-set size of `simulations` cascades from each candidate.
///
/// Candidate `v` uses seeds `derive(seed, [v, k])`, so scores do not depend
/// on how candidates are split across threads.
pub fn baseline_im(
    universe: &WeightedDigraph,
    candidates: &[usize],
    simulations: u32,
    seed: u64,
) -> Result<ScoreVector> {
    if simulations == 0 {
        return Err(Error::InvalidParameter(
            "im_simulations must be at least 1".into(),
        ));
    }
    if let Some(&v) = candidates.iter().find(|&&v| !universe.contains(v)) {
        return Err(Error::UnknownNode(v));
    }
    let means: Vec<f64> = candidates
        .par_iter()
        .map_init(Simulator::new, |sim, &v| {
            let total: usize = (0..simulations)
                .map(|k| sim.active_count(universe, v, seed::derive(seed, &[v as u64, k as u64])))
                .sum();
            total as f64 / simulations as f64
        })
        .collect();
    ScoreVector::from_raw(candidates.to_vec(), means)
}

/// Scores each root by its heaviest spanning out-tree (max product of
/// weights), computed as a minimum arborescence on `-ln p` costs.
pub fn baseline_max_arborescence(ga: &WeightedDigraph) -> Result<ScoreVector> {
    let n = ga.node_count();
    let edges: Vec<(usize, usize, f64)> = ga
        .edges()
        .iter()
        .map(|e| (e.src, e.dst, -e.p.ln()))
        .collect();
    let logs: Vec<f64> = (0..n)
        .map(|r| min_arborescence_cost(n, r, &edges).map_or(f64::NEG_INFINITY, |c| -c))
        .collect();
    ScoreVector::from_log((0..n).collect(), logs)
}

/// Chu-Liu/Edmonds: cost of the cheapest spanning out-tree rooted at
/// `root`, or `None` if some node is unreachable.
pub fn min_arborescence_cost(n: usize, root: usize, edges: &[(usize, usize, f64)]) -> Option<f64> {
    let mut edges: Vec<(usize, usize, f64)> =
        edges.iter().copied().filter(|e| e.0 != e.1).collect();
    let mut n = n;
    let mut root = root;
    let mut total = 0.0;
    const NONE: usize = usize::MAX;
    loop {
        let mut best = vec![f64::INFINITY; n];
        let mut pre = vec![NONE; n];
        for &(u, v, w) in &edges {
            if u != v && w < best[v] {
                best[v] = w;
                pre[v] = u;
            }
        }
        if (0..n).any(|v| v != root && pre[v] == NONE) {
            return None;
        }
        best[root] = 0.0;

        let mut id = vec![NONE; n];
        let mut mark = vec![NONE; n];
        let mut cycles = 0;
        #[allow(clippy::needless_range_loop)]
        for v in 0..n {
            total += best[v];
            let mut x = v;
            while mark[x] != v && id[x] == NONE && x != root {
                mark[x] = v;
                x = pre[x];
            }
            if x != root && id[x] == NONE {
                let mut y = pre[x];
                while y != x {
                    id[y] = cycles;
                    y = pre[y];
                }
                id[x] = cycles;
                cycles += 1;
            }
        }
        if cycles == 0 {
            return Some(total);
        }
        for slot in id.iter_mut() {
            if *slot == NONE {
                *slot = cycles;
                cycles += 1;
            }
        }
        edges = edges
            .iter()
            .filter_map(|&(u, v, w)| {
                let (cu, cv) = (id[u], id[v]);
                (cu != cv).then(|| (cu, cv, w - best[v]))
            })
            .collect();
        n = cycles;
        root = id[root];
    }
}
