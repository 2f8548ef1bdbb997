use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node {node} out of range for graph with {num_nodes} nodes")]
    NodeOutOfRange { node: usize, num_nodes: usize },

    #[error("self-loop on node {node}")]
    SelfLoop { node: usize },

    #[error("edge ({u}, {v}) does not join a user to an item")]
    NotBipartite { u: usize, v: usize },

    #[error("partition {num_users} users + {num_items} items does not cover {num_nodes} nodes")]
    PartitionMismatch {
        num_users: usize,
        num_items: usize,
        num_nodes: usize,
    },

    #[error("proximity order a={a} exceeds b={b}")]
    InvalidOrder { a: usize, b: usize },

    #[error("proximity order {order} exceeds the maximum {max}")]
    OrderTooLarge { order: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("negative quota unreachable: sampled {achieved} of {quota} pairs")]
    QuotaUnreachable { achieved: usize, quota: usize },

    #[error("non-finite embeddings at step {step}")]
    Divergence { step: usize },

    #[error("{nodes} nodes exceed the dense limit of {limit}")]
    DenseLimit { nodes: usize, limit: usize },

    #[error("score support is missing entry ({row}, {col}) required by a link mask")]
    SupportMismatch { row: usize, col: usize },

    #[error("sign structure violated at {} position(s), first: {:?}", .violations.len(), .violations.first())]
    SignViolation { violations: Vec<(usize, usize, f64)> },

    #[error("substep trace has {found} entries, expected 4")]
    TraceLength { found: usize },

    #[error("graph has no user/item partition")]
    MissingPartition,

    #[error("empty support: {0}")]
    EmptySupport(&'static str),

    #[error("no user has a non-empty evaluation set")]
    NoEvaluableUsers,

    #[error("every grid point diverged")]
    AllDivergent,

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("input {0} contains no edges")]
    EmptyInput(String),

    #[error("dataset statistics mismatch: {0}")]
    StatsMismatch(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}
