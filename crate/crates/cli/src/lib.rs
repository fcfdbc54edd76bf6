//! Command implementations and on-disk formats for the `gsrc` binary.

pub mod commands;
pub mod metadata;
pub mod shard;

use std::path::Path;

use thiserror::Error;

pub use commands::{run, Cli};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONSTRUCTION: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{stage} failed: {source}")]
    Construction { stage: &'static str, source: gsrc::Error },

    #[error(transparent)]
    Core(#[from] gsrc::Error),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("{0}")]
    Mismatch(String),

    #[error("missing shards: {}", .0.join(", "))]
    MissingShards(Vec<String>),

    #[error("need {need} shards, found {found} ({} short)", .need - .found)]
    TooFewShards { need: usize, found: usize },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> i32 {
        use gsrc::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Construction { source: E::MdsSearchExhausted { .. }, .. } => EXIT_VERIFICATION,
            CliError::Construction { source: E::InvalidParams(_), .. } => EXIT_USAGE,
            CliError::Construction { .. } => EXIT_CONSTRUCTION,
            CliError::Core(e) => match e {
                E::InvalidParams(_) | E::UnknownNode(_) | E::Unsupported(_) | E::WrongNodeCount { .. } => EXIT_USAGE,
                E::MdsSearchExhausted { .. }
                | E::SingularSystem { .. }
                | E::SingularMatrix
                | E::MissingSymbol(_)
                | E::ShapeMismatch(_)
                | E::Format(_) => EXIT_VERIFICATION,
                E::Io { .. } => EXIT_IO,
                _ => EXIT_CONSTRUCTION,
            },
            CliError::Mismatch(_) => EXIT_VERIFICATION,
            CliError::Io { .. } | CliError::MissingShards(_) | CliError::TooFewShards { .. } => EXIT_IO,
        }
    }
}
