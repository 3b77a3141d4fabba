use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(&'static str),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("assembly failed at node {node}: {reason}")]
    Assembly { node: usize, reason: String },

    #[error("numerically singular pivot at index {index}")]
    SingularPivot { index: usize },

    #[error("factorization unstable: check residual {residual:e}")]
    UnstableFactorization { residual: f64 },

    #[error("singular bordered system: {0}")]
    SingularBordered(String),

    #[error("iteration failed after {iterations} iterations, last residual {residual:e}")]
    IterationFailed { iterations: usize, residual: f64 },

    #[error("nonlinear solve failed at t = {t}: {reason}; residual history {history:?}")]
    SolverFailed {
        t: f64,
        reason: String,
        history: Vec<f64>,
    },

    #[error("structure violated: {0}")]
    Structure(String),

    #[error("invalid input: {0}")]
    Validation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
