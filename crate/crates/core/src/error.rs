//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by kernel construction, optic composition, discretization
/// and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// A finite-support distribution failed validation.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// Two objects that must share a dimension do not.
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    /// Composition of kernel families that do not mix (Gaussian with finite).
    #[error("unsupported kernel mixture: {0}")]
    UnsupportedMixture(String),

    /// A covariance matrix is not symmetric within tolerance.
    #[error("matrix is not symmetric: max asymmetry {max_asymmetry:e}")]
    NotSymmetric { max_asymmetry: f64 },

    /// A covariance matrix has an eigenvalue below the PSD tolerance.
    #[error("matrix is not positive semi-definite: min eigenvalue {min_eigenvalue:e}")]
    NotPositiveSemiDefinite { min_eigenvalue: f64 },

    /// A constructor argument violated its documented range or shape.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The operation is not defined for the given kernel family or space.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// A discretization grid exceeds the configured node budget.
    #[error("grid budget exceeded: {nodes} nodes > budget {budget} (per-dimension counts: {dims})")]
    BudgetExceeded {
        nodes: usize,
        budget: usize,
        dims: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
