use thiserror::Error;

use crate::partition::McEstimate;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument lies outside the domain where the routine is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature exhausted its refinement budget.
    #[error("quadrature tolerance not met: estimate {estimate:e}, error bound {error_bound:e}")]
    ToleranceNotMet { estimate: f64, error_bound: f64 },

    /// Importance weights collapsed onto too few samples to be trusted.
    #[error(
        "unreliable Monte Carlo estimate: effective sample size {:.2} (log value {:.6})",
        .0.effective_sample_size,
        .0.log_value
    )]
    UnreliableEstimate(Box<McEstimate>),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
