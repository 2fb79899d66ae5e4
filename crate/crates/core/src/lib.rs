//! Source detection for Independent Cascade diffusions.
//!
//! Given a weighted directed graph and the set of nodes activated by one
//! cascade, the detectors rank the nodes that could have started it. The
//! main detectors turn the candidate subgraph into a Markov chain whose
//! stationary distribution is proportional to each node's total
//! spanning out-tree weight.

pub mod candidates;
pub mod chain;
pub mod detectors;
pub mod diffusion;
pub mod error;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod oracles;
pub mod seed;
pub mod stationary;

pub use candidates::{candidate_set, CandidateSet};
pub use chain::{convert, ChainAux, MarkovChain, Scheme};
pub use detectors::{detect, DetectorSpec, Method, StationaryMode, TrialContext, Universe};
pub use diffusion::{simulate_ic, Cascade, Simulator};
pub use error::{Error, Result};
pub use graph::{
    generate_random_graph, load_edge_list, parse_weighted, Edge, RandomGraphParams, WeightedDigraph,
};
pub use harness::{run_experiment, ExperimentConfig, ResultsTable, RunConfig, TrialRecord};
pub use stationary::{stationary_direct, stationary_random_walk, Distribution, ScoreVector};
