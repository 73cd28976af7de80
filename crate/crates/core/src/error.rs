//! Error types shared across the solver and verification modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: n_cells = {n_cells}, need at least 2 cells")]
    InvalidGrid { n_cells: usize },

    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("nonpositive {field} at cell {index}: {value}")]
    NonPositive {
        field: &'static str,
        index: usize,
        value: f64,
    },

    #[error("invalid parameter {name}: {value} ({constraint})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("density samples not normalized: total mass {total} differs from 1 by more than {tol}")]
    UnnormalizedDensity { total: f64, tol: f64 },

    #[error("coordinate samples not strictly increasing at index {index}")]
    NotIncreasing { index: usize },

    #[error("no root: x - ln x = {e0} has no solution for E0 < 1")]
    NoRoot { e0: f64 },

    #[error("singular tridiagonal system: zero pivot at row {row}")]
    SingularSystem { row: usize },

    #[error("unknown initial condition '{0}'")]
    UnknownInitialCondition(String),

    #[error(
        "step failed at t = {time}: dt underflow ({dt} < dt_min {dt_min}) after {halvings} halvings; cause: {cause}"
    )]
    StepFailed {
        time: f64,
        dt: f64,
        dt_min: f64,
        halvings: usize,
        cause: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed snapshot {path}: {reason}")]
    MalformedSnapshot { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
