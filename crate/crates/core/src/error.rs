use thiserror::Error;

use crate::dynamics::EvolutionState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("{condition} requires dimension {expected}, got {actual}")]
    DimensionMismatch {
        condition: String,
        expected: String,
        actual: usize,
    },

    #[error("parameters are not admissible: {0}")]
    Inadmissible(String),

    #[error("mass of component {component} is {actual}, expected {expected}")]
    MassViolation {
        component: usize,
        actual: f64,
        expected: f64,
    },

    #[error("negative value in input to {0}")]
    NegativeField(&'static str),

    #[error("phase of component {0} is undefined (vanishing inner product)")]
    PhaseUndefined(usize),

    #[error("shooting bracket failure: last bracket [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },

    #[error("no convergence after {iterations} iterations (best value {best})")]
    NotConverged { iterations: usize, best: f64 },

    #[error("field became non-finite at t = {time}")]
    Diverged {
        time: f64,
        last_good: Box<EvolutionState>,
    },

    #[error("config syntax error at line {line}, column {column}: {message}")]
    ConfigSyntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config field `{field}`: {message}")]
    ConfigField { field: String, message: String },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
