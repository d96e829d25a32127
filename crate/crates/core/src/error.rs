use thiserror::Error;

/// Errors raised by the pricing engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A constructor argument violates a type invariant.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Inputs are individually valid but the requested operation is undefined for them.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative method or quadrature rule stopped before reaching its tolerance.
    #[error("{what} did not converge after {iterations} iterations (achieved {achieved:.3e}, required {required:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        achieved: f64,
        required: f64,
    },

    /// A value falls outside the range a discretization can represent.
    #[error("out of range: {0}")]
    Range(String),

    /// A post-condition that should hold by construction failed.
    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("usage error: {0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonConvergence { .. } | Error::Internal(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
