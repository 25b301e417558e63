use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument failed validation (non-finite number, empty spectrum,
    /// dimension mismatch, non-canonical step order, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A query has no solution: the requested (Λ, W_min, ΔF) combination
    /// violates the ordering the closed forms require, or a grid search
    /// found no admissible distribution.
    #[error("infeasible query: {0}")]
    Infeasible(String),

    /// An iterative solver ran out of iterations.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// Exact convolution would exceed the configured atom budget.
    #[error("atom budget exceeded: {0}; use Monte Carlo sampling instead")]
    AtomBudget(String),

    /// Probability mass failed validation. This signals an upstream bug,
    /// not a user error.
    #[error("probability normalization failed: {0}")]
    Normalization(String),

    /// A protocol file could not be parsed or validated.
    #[error("protocol parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
