use thiserror::Error;

/// Errors raised by the solvers, the oracles and the I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("non-finite value at node {node} (t = {t})")]
    NonFinite { node: usize, t: f64 },

    #[error("support reached node {node} of {nodes} at t = {t}, inside the outer margin")]
    SupportMargin { node: usize, nodes: usize, t: f64 },

    #[error("obstacle solver did not converge after {iterations} sweeps (last update {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("infeasible obstacle problem: {0}")]
    Infeasible(String),

    #[error("overshoot cascade reached the outer boundary at t = {t}; reduce dt")]
    Overshoot { t: f64 },

    #[error("root find failed on [{lo}, {hi}]: {reason}")]
    RootFind { lo: f64, hi: f64, reason: String },

    #[error("barrier rejected: {0}")]
    Barrier(String),

    #[error("config: {0}")]
    Config(String),

    #[error("corrupt data in {path}: {reason}")]
    Corrupt { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
