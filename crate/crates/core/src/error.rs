use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("fields live on different meshes")]
    MeshMismatch,

    #[error("refinement needs {required} nodes, budget is {budget}")]
    NodeBudgetExceeded { required: usize, budget: usize },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("envelope violated: {what} at s = {s:e} ({value:e} > {bound:e})")]
    EnvelopeViolation {
        what: &'static str,
        s: f64,
        value: f64,
        bound: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("divergence guard tripped: sup norm {norm:e} exceeds cap {cap:e}")]
    Diverged { norm: f64, cap: f64 },

    #[error("hypothesis (hyp) not satisfied: {0}")]
    HypothesisNotSatisfied(String),

    #[error("linear system is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("expression `{expr}`: {message}")]
    Expression { expr: String, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
