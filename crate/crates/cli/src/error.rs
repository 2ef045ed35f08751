use std::path::PathBuf;

use corrgan_core::CorrError;
use corrgan_gan::GanError;
use corrgan_service::{GameError, ServiceError};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] CorrError),

    #[error(transparent)]
    Gan(#[from] GanError),

    #[error(transparent)]
    Service(#[from] ServiceError),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 3 for configuration errors, 4 for unreadable
    /// or malformed files, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "config" | "architecture" | "unsupported_dimension" => EXIT_CONFIG,
            "io" | "parse" | "checkpoint" => EXIT_IO,
            _ => EXIT_FAILURE,
        }
    }

    /// Short machine-readable error class.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Core(e) => core_kind(e),
            CliError::Gan(e) => match e {
                GanError::Architecture(_) => "architecture",
                GanError::Shape(_) => "shape",
                GanError::Config(_) => "config",
                GanError::NonFiniteLoss { .. } => "non_finite_loss",
                GanError::Checkpoint { .. } => "checkpoint",
                GanError::Io { .. } => "io",
                GanError::Core(e) => core_kind(e),
            },
            CliError::Service(e) => match e {
                ServiceError::Data(e) => core_kind(e),
                ServiceError::Game(GameError::Log { .. }) => "io",
                ServiceError::Game(_) => "game",
                ServiceError::Bind { .. } | ServiceError::Server(_) => "io",
            },
        }
    }
}

fn core_kind(e: &CorrError) -> &'static str {
    match e {
        CorrError::Structure(_) => "structure",
        CorrError::Shape(_) => "shape",
        CorrError::NotPsd { .. } => "not_psd",
        CorrError::Degenerate(_) => "degenerate",
        CorrError::Config(_) => "config",
        CorrError::UnsupportedDimension { .. } => "unsupported_dimension",
        CorrError::Parse { .. } => "parse",
        CorrError::Numerical(_) => "numerical",
        CorrError::NoConvergence { .. } => "no_convergence",
        CorrError::Io { .. } => "io",
    }
}

/// The one-line error report written to stderr.
pub fn error_line(code: i32, kind: &str, msg: &str) -> String {
    format!("error: code={code} kind={kind} msg={msg:?}")
}
