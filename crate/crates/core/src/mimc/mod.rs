//! Weighted multi-index Monte Carlo over tensor-product index boxes.

mod index;
mod oracle;
mod plan;
mod synthetic;

use thiserror::Error;

pub use index::{epsilon_sign, MultiIndex};
pub use oracle::{positive_semidefinite, ChainOracle, CovBlock, CovarianceOracle, TableOracle};
pub use plan::{
    build_r_matrix, mimc_plan, mimc_plan_in_order, node_objective, optimize_node, theta_table, MimcNode, MimcPlan,
    Weighting,
};
pub use synthetic::{estimate_oracle, run_plan, stream_key, MimcEstimate, MultiIndexSampler, SeparableModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MimcError {
    #[error("no data for index {0}")]
    MissingNode(MultiIndex),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("covariance block at {index}: {reason}")]
    BadBlock { index: MultiIndex, reason: String },
    #[error("weight optimization at {index} did not converge (best value {value})")]
    NotConverged { index: MultiIndex, point: Vec<f64>, value: f64 },
    #[error("target standard deviation must be positive and finite")]
    InvalidTarget,
    #[error("invalid node order: {0}")]
    BadOrder(String),
    #[error("{0}")]
    Unsupported(String),
}
