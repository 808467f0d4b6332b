use thiserror::Error;

/// Errors raised by the solvers, the simulator and scenario ingestion.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("argument {x} is below the Lambert W branch point -1/e")]
    Domain { x: f64 },

    #[error("invalid bracket [{lo}, {hi}]: {reason}")]
    Bracket { lo: f64, hi: f64, reason: String },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("unbounded: {0}")]
    Unbounded(String),

    #[error("no convergence after {iterations} iterations: {reason}")]
    Convergence { iterations: usize, reason: String },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be positive and finite, got {value}"),
        })
    }
}

pub(crate) fn check_nonnegative(name: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be non-negative and finite, got {value}"),
        })
    }
}
