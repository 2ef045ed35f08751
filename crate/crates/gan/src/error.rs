use std::path::PathBuf;

use corrgan_core::CorrError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GanError {
    #[error("invalid architecture: {0}")]
    Architecture(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Training produced a NaN or infinite loss. The model state at that
    /// step is saved when a checkpoint directory is configured.
    #[error("non-finite {which} loss at step {step}{}", checkpoint_note(.checkpoint))]
    NonFiniteLoss {
        step: u64,
        which: &'static str,
        checkpoint: Option<PathBuf>,
    },

    #[error("bad checkpoint {path}: {msg}")]
    Checkpoint { path: PathBuf, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] CorrError),
}

fn checkpoint_note(p: &Option<PathBuf>) -> String {
    match p {
        Some(p) => format!(" (diagnostic checkpoint {})", p.display()),
        None => String::new(),
    }
}

impl GanError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GanError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = GanError> = std::result::Result<T, E>;
