use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the core crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh parameter: {0}")]
    MeshParameter(String),

    #[error("triangle {index} has non-positive signed area {area:e}")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("matrix is not symmetric positive definite ({0})")]
    NotPositiveDefinite(String),

    #[error("eigensolver did not converge after {iterations} iterations (relative residual {residual:e})")]
    EigenNotConverged { iterations: usize, residual: f64 },

    #[error("rayleigh quotient of a zero vector")]
    ZeroVector,

    #[error("eigenvector is not B-normalized (u^T B u = {0})")]
    NotNormalized(f64),

    #[error("invalid volume constraint: {0}")]
    VolumeConstraint(String),

    #[error("invalid problem specification: {0}")]
    ProblemSpec(String),

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid matrix pencil: {0}")]
    Pencil(String),

    #[error("feasible polytope is empty")]
    EmptyPolytope,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
