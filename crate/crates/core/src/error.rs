use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the correlation-matrix toolkit.
#[derive(Debug, Error)]
pub enum CorrError {
    /// Input has the wrong shape or contains non-finite values.
    #[error("structural input error: {0}")]
    Structure(String),

    /// A vector length that does not correspond to any matrix size.
    #[error("shape error: {0}")]
    Shape(String),

    /// A reconstructed matrix fell outside the elliptope.
    #[error("not positive semidefinite: minimum eigenvalue {min_eigenvalue:e}")]
    NotPsd { min_eigenvalue: f64 },

    /// Data cannot support the requested estimate (e.g. a constant column).
    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// A configuration value violates its invariant.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported dimension {n}: {reason}")]
    UnsupportedDimension { n: usize, reason: String },

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The alternating-projection repair ran out of iterations.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        last_iterate: Box<crate::RawMatrix>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CorrError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CorrError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = CorrError> = std::result::Result<T, E>;
