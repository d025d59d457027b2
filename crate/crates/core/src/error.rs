use std::fmt;

use crate::multires::IndexInterval;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient data for scale estimate (need n >= 2, got {0})")]
    InsufficientData(usize),

    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("interval {0} contains no design point")]
    EmptyInterval(String),

    #[error("{0}")]
    Infeasible(InfeasibilityReport),

    #[error("{0}")]
    IterationLimit(Box<IterationLimit>),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Names the constraint blocks that together admit no solution.
///
/// The list is irreducible at block granularity: dropping any one named
/// block (other than the confidence region itself) makes the rest feasible.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InfeasibilityReport {
    pub blocks: Vec<String>,
}

impl fmt::Display for InfeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "infeasible constraint set: {}", self.blocks.join("; "))
    }
}

/// State carried out of the taut-string squeezing loop when it gives up.
#[derive(Debug, Clone)]
pub struct IterationLimit {
    pub iterations: usize,
    pub fit: Vec<f64>,
    pub worst_interval: IndexInterval,
    pub worst_value: f64,
    pub threshold: f64,
}

impl fmt::Display for IterationLimit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "no admissible fit after {} iterations; worst interval {} has |w| = {:.6} > {:.6}",
            self.iterations, self.worst_interval, self.worst_value, self.threshold
        )
    }
}
