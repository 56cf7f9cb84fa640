//! Single-pair personalized PageRank estimation.
//!
//! The bidirectional estimators combine a reverse local push around the
//! target with forward random walks from the source. Monte-Carlo and
//! reverse-push baselines, exact oracles, a precomputed frontier store and
//! an experiment harness live alongside them.

pub mod bench;
pub mod error;
pub mod estimators;
pub mod frontier;
pub mod graph;
pub mod oracle;
pub mod synthetic;
pub mod walks;

pub use error::{Error, Result};
pub use estimators::{
    balanced_fast_ppr, detect_high, estimate, fast_ppr, local_update, monte_carlo, theoretical_fast_ppr, Algorithm,
    Decision, Estimate, QueryParams, TheoreticalParams,
};
pub use frontier::{balanced_frontier, frontier_push, FrontierResult};
pub use graph::{degrees, load_edge_list, load_edge_list_file, Graph, NodeId};
