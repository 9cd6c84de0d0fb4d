use thiserror::Error;

/// Errors raised by the model, solvers and simulation engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A value violates an invariant of a model type.
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },

    /// No sensing set of the configured size meets the PU protection constraint.
    #[error("no sensing set of size {size} satisfies PU protection on channel {channel}")]
    InfeasibleProtection { channel: usize, size: usize },

    /// The protection budget can never be exhausted, so the CAD is not capped.
    #[error("channel available duration is unbounded (p_r >= p_off * (1 - F_f))")]
    UnboundedCad,

    /// The dense simplex solver failed to make progress.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// Scenario configuration could not be used.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Invalid {
        field,
        reason: reason.into(),
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
