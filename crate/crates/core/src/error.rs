use thiserror::Error;

/// Errors produced anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate edge {src} -> {dst}")]
    DuplicateEdge { src: String, dst: String },

    #[error("self loop on node {0}")]
    SelfLoop(String),

    #[error("graph has no edges")]
    EmptyGraph,

    #[error("edge {src} -> {dst} has no weight; assign weights first")]
    MissingWeight { src: String, dst: String },

    #[error("node {0} is not in the graph")]
    UnknownNode(usize),

    #[error("active set is empty")]
    EmptyActiveSet,

    #[error("no active node reaches every other active node; not a valid cascade")]
    NoCandidates,

    #[error("inconsistent cascade: {0}")]
    InconsistentCascade(String),

    #[error("node {node} has zero weighted in-degree")]
    ZeroInDegree { node: usize },

    #[error("expected a {expected} chain, got {found}")]
    SchemeMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("chain is reducible; score with the arborescence (matrix-tree) scorer instead")]
    ReducibleChain,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{what} exceeds capacity: {got} > {limit}")]
    Capacity {
        what: &'static str,
        limit: usize,
        got: usize,
    },

    #[error("trial quota unreachable: {valid} of {wanted} valid trials after {samples} samples ({too_small} too small, {singleton} singleton)")]
    QuotaUnreachable {
        wanted: usize,
        valid: usize,
        samples: u64,
        too_small: u64,
        singleton: u64,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for errors caused by bad input rather than a runtime failure.
    /// A missing file counts as bad input; other I/O errors do not.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Numerical(_) | Error::QuotaUnreachable { .. } => false,
            Error::Io(e) => e.kind() == std::io::ErrorKind::NotFound,
            _ => true,
        }
    }
}
