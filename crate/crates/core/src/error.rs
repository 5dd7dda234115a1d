use thiserror::Error;

/// Errors raised by the numerical layers of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no root: {0}")]
    NoRoot(String),

    #[error("no convergence after {iterations} iterations: {what}")]
    Convergence { what: String, iterations: usize },

    #[error("drift {drift:?} is not strictly inside the quarter plane")]
    DriftNotInterior { drift: (f64, f64) },

    #[error("walk is not small-step: {0}")]
    NotSmallStep(String),

    #[error("pole of the uniformization at s = {s}")]
    Pole { s: f64 },

    #[error("tail bound {tail_bound:e} exceeds truncation tolerance {tol:e} at (i, j) = ({i}, {j}); value {value}")]
    Precision {
        i: u32,
        j: u32,
        value: f64,
        tail_bound: f64,
        tol: f64,
    },

    #[error("importance weight exponent {0} out of range")]
    WeightOverflow(f64),

    #[error("degenerate estimate: {0}")]
    Degenerate(String),

    #[error("covariance is not symmetric positive definite")]
    NotSpd,
}

pub type Result<T> = std::result::Result<T, Error>;
