//! Crate-wide error type. Numeric payloads are reported as `f64` regardless
//! of the working scalar so the type stays object-safe and non-generic.

use thiserror::Error;

/// Errors surfaced by scenario construction, the solvers, the Monte-Carlo
/// oracle, and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes do not line up (matrix sizes, config array lengths, ...).
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A scenario or config violates a model invariant (non-Hermitian or
    /// indefinite correlation matrix, tau^2 outside [0,1], rho <= 0, ...).
    #[error("invalid scenario: {0}")]
    Scenario(String),

    /// An iterative solver ran out of iterations.
    #[error("{context}: no convergence after {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        context: String,
        iterations: usize,
        residual: f64,
    },

    /// A direct linear-algebra factorization failed.
    #[error("linear algebra: {0}")]
    Linalg(String),

    /// An operation was invoked outside its supported regime (homogeneity
    /// violated, psi = 0, N_i = 1 bit mapping, tau != 0 perfect-CSIT path).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Harness I/O.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Config (de)serialization.
    #[error("config: {0}")]
    Json(#[from] serde_json::Error),

    /// CSV emission.
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
