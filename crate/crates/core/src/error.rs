use thiserror::Error;

use crate::control::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller broke a precondition (mismatched variable lists, bad sizes, unbound symbols).
    #[error("usage error: {0}")]
    Usage(String),

    /// An operation was applied outside the domain on which it is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("table {kind} has no value at index {index:?}")]
    OutOfRange { kind: String, index: Vec<i64> },

    #[error("quadrature did not converge up to order {order}: last two estimates {previous:e} and {last:e}")]
    Quadrature { order: usize, previous: f64, last: f64 },

    #[error("singular Galerkin matrix at iteration {iteration} (pivot {pivot:e})")]
    Singular {
        iteration: usize,
        pivot: f64,
        residual_history: Vec<f64>,
    },

    #[error("closed loop diverged at t = {t} (state {state})")]
    Divergence {
        t: f64,
        state: f64,
        partial: Box<Trajectory>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }
}
