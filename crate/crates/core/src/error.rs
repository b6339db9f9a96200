use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("graph must have at least one node")]
    EmptyGraph,

    #[error("arc ({tail}, {head}): endpoint out of range for {n} nodes")]
    EndpointOutOfRange { tail: usize, head: usize, n: usize },

    #[error("arc ({node}, {node}): self-loops are not allowed")]
    SelfLoop { node: usize },

    #[error("graph is not weakly connected")]
    Disconnected,

    #[error("dangling node {node}: out-degree is zero")]
    DanglingNode { node: usize },

    #[error("node {node} unreachable from all landmarks")]
    Unreachable { node: usize },

    #[error("landmarks {first} and {second} are mutually unreachable")]
    LandmarksUnreachable { first: usize, second: usize },

    #[error("stationary estimate not positive at node {node}")]
    NonPositiveStationary { node: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("degenerate reference: configuration has zero variance")]
    DegenerateReference,

    #[error("underdetermined: {0}")]
    Underdetermined(String),

    #[error("layer {layer}: arity mismatch, {detail}")]
    ArityMismatch { layer: usize, detail: String },

    #[error("layer {layer}, node {node}: {reason}")]
    Execution {
        layer: usize,
        node: usize,
        reason: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
