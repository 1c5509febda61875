use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Input data (a network file, a matrix) failed validation.
    #[error("validation error: {0}")]
    Validation(String),
    /// A structural precondition does not hold (e.g. disconnected network).
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },
    #[error("numerical error: {0}")]
    Numerical(String),
    /// The persistency search ran out of node budget.
    #[error("search budget of {budget} nodes exceeded; depths below {proven_lower} ruled out, best known {best_known:?}")]
    Budget {
        budget: usize,
        proven_lower: usize,
        best_known: Option<usize>,
    },
    /// Perturbative regime check failed (U not large enough compared to t).
    #[error("regime error: {0}")]
    Regime(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
