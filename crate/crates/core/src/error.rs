use thiserror::Error;

/// Errors raised by the solvers, chain diagnostics and experiment plumbing.
#[derive(Debug, Error)]
pub enum LmdpError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e}, tolerance {tol:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    #[error("support violation at ({row}, {col}): mass {mass:e} where the reference has none")]
    SupportViolation { row: usize, col: usize, mass: f64 },

    #[error("chain is not ergodic: {0}")]
    NonErgodic(String),

    #[error("kernel is not primitive (reducible or periodic)")]
    NotPrimitive,

    #[error("state {state} has zero marginal mass; policy is undefined there")]
    ZeroMarginal { state: usize },

    #[error("support graph has no cycle")]
    NoCycle,

    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("instance generation failed: {0}")]
    GenerationFailed(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LmdpError>;
