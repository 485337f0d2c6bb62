use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

/// Unified error type for the crate.
///
/// `NumericalFailure`-class variants (`NonPositiveDefinite`, `StepSizeFloor`,
/// `ReplicateFailures`, `DegenerateResidual`) signal that a computation was
/// well-posed but the data did not support it; the remaining variants are
/// caller mistakes.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("matrix asymmetric beyond tolerance: max |m - m^T| = {max_dev:e}")]
    Asymmetric { max_dev: f64 },

    #[error("node index {index} out of range for {node_count} nodes")]
    NodeOutOfRange { index: usize, node_count: usize },

    #[error("matrix not positive definite: {context}")]
    NonPositiveDefinite { context: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("columns {col_a} and {col_b} are never observed together")]
    MissingCoObservation { col_a: usize, col_b: usize },

    #[error("step size for node {node} fell below {floor:e} without an accepted update")]
    StepSizeFloor { node: usize, floor: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "regression design is rank deficient; pass a positive ridge value \
         (CLI: --ridge) to regularize the blanket regression"
    )]
    RankDeficientDesign,

    #[error("residuals of node {node} are numerically constant; correlations undefined")]
    DegenerateResidual { node: usize },

    #[error("dual certificate infeasible: block ({a},{b}) violates the constraint by {excess:e}")]
    InfeasibleDual { a: usize, b: usize, excess: f64 },

    #[error("problem dimension {dim} exceeds the supported limit {max} ({context})")]
    SizeGuard {
        dim: usize,
        max: usize,
        context: &'static str,
    },

    #[error("{failed} of {total} replicates failed (more than 10% tolerated)")]
    ReplicateFailures { failed: usize, total: usize },
}
