use std::io;

use thiserror::Error;

/// Errors produced by graph loading, estimation, and the frontier store.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("edge list contains no edges")]
    EmptyInput,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("node {node} is out of range (graph has {node_count} nodes)")]
    NodeOutOfRange { node: u64, node_count: usize },

    #[error(
        "walk-length cap {l_cap} leaves truncation mass {achievable:e}, above the requested tolerance {requested:e}"
    )]
    TruncationTooLarge {
        l_cap: usize,
        achievable: f64,
        requested: f64,
    },

    #[error("rejection sampling at node {node} exceeded {limit} draws")]
    RejectionLimit { node: u32, limit: u64 },

    #[error("frontier store has no record for target {0}")]
    MissingRecord(u32),

    #[error("frontier store mismatch: {0}")]
    StoreMismatch(String),

    #[error("corrupt binary file: {0}")]
    Corrupt(String),

    #[error("storage bound violated: {entries} entries exceed m/eps_r = {bound}")]
    StorageBound { entries: u64, bound: f64 },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
