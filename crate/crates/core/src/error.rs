use std::path::PathBuf;

use crate::inference::ParamVector;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("validation error{}: {msg}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Validation { row: Option<usize>, msg: String },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("point {index} at ({x}, {y}) lies outside the grid extent")]
    OutOfDomain { index: usize, x: f64, y: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty pattern: {0}")]
    EmptyPattern(String),

    #[error("Cholesky factorization failed (final jitter {jitter:e})")]
    Factorization { jitter: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("negative Hessian is not positive definite at the mode; inspect the hyperparameter profile")]
    IndefiniteHessian,

    #[error("optimizer did not converge in {iterations} iterations (scaled gradient norm {grad_norm:e})")]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        best: Box<ParamVector>,
    },

    #[error("degenerate intensity: lambda = 0 in occupied cell {cell}")]
    DegenerateIntensity { cell: usize },

    #[error("every hyperparameter grid point failed; first failure: {first}")]
    ProfileFailed { first: String },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(row: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Validation {
            row,
            msg: msg.into(),
        }
    }
}
