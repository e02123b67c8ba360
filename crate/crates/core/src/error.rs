use thiserror::Error;

/// Errors raised by the model, analytics and simulator layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    /// The large-flow threshold formula has a non-positive denominator, so
    /// the rotor plane is always at least as fast and every non-small flow
    /// is effectively medium.
    #[error("rotor always faster; no finite large threshold (all flows medium): denominator {denominator}")]
    NoLargeThreshold { denominator: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("distribution has no mass in the {0} class")]
    NoClassMass(&'static str),

    #[error("graph is disconnected: {dst} unreachable from {src}")]
    Disconnected { src: usize, dst: usize },

    #[error("bisection did not converge after {iterations} iterations (residual {residual})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
