//! Discrete chains: the Aldous down-up chain, its 2-tree projection,
//! ordered Chinese restaurants and their splitting-tree representation.

pub mod aldous;
pub mod crp;
pub mod splitting;
pub mod twotree;

use thiserror::Error;

pub use aldous::{
    aldous_downup_step, aldous_transition_matrix, enumerate_trees, project_two_tree, uniform_tree, BinaryTree,
    CountMatrix,
};
pub use crp::{ocrp_sample, ocrp_seat, poissonized_step, poissonized_total_rate, CrpConfig, CrpParams, Seat};
pub use splitting::{
    build_splitting_tree, discrete_skewer, immigrant_roots, skewer_trace, to_jccp, trace_csv, ForestScale, JccpJump,
    RootKind, RootSpec, SpindleForest,
};
pub use twotree::{lumpability_check, two_tree_downup_step, two_tree_transition_counts, TwoTree, TwoTreeOutcome};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("the down-up chain needs at least 3 leaves, got {0}")]
    TooFewLeaves(usize),
    #[error("node {0} is not a branch point")]
    InvalidNode(usize),
    #[error("2-tree masses must be positive")]
    InvalidTwoTree,
    #[error("tables must have positive population")]
    EmptyTable,
    #[error("configuration has no customers and no immigration")]
    EmptyConfig,
    #[error("the (1/2,-1/2) restaurant needs at least two tables")]
    SingleTableMinusHalf,
    #[error("unsupported θ = {0}")]
    UnsupportedParams(f64),
}
