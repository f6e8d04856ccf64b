use thiserror::Error;

use crate::expr::{EvalError, ParseError};

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("improper function: {0} is +inf everywhere")]
    Improper(String),

    #[error(
        "infeasible at this grid: constraint h{constraint} is the most violated, \
         min over the grid of the worst violation is {violation:e} at point {point:?}"
    )]
    Infeasible { constraint: usize, violation: f64, point: Vec<f64> },

    #[error("coupling value {value:e} is negative at x={x:?}, y={y:?}")]
    NegativeCoupling { value: f64, x: Vec<f64>, y: Vec<f64> },

    #[error("coupling value is not finite at x={x:?}, y={y:?}")]
    NonFiniteCoupling { x: Vec<f64>, y: Vec<f64> },

    #[error("point {0:?} is not in the sampled set")]
    PointNotFound(Vec<f64>),

    #[error("the origin is not a grid point of {0}")]
    MissingOrigin(&'static str),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("input not sorted: {0}")]
    Unsorted(String),

    #[error("hypothesis {hypothesis} fails at k={k}: {detail}")]
    Hypothesis { k: u64, hypothesis: &'static str, detail: String },

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
