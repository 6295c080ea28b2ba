use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),

    #[error("evaluation error: {0}")]
    Eval(#[from] EvalError),

    #[error("invalid problem specification: {0}")]
    InvalidSpec(String),

    /// Adaptive quadrature hit its depth limit; carries what it had.
    #[error("quadrature did not converge: estimate {estimate:e}, error bound {error_bound:e}")]
    Quadrature { estimate: f64, error_bound: f64 },

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidSpec(msg.into())
    }
}
