//! Command-line front end: configuration handling and one function per
//! subcommand. `main.rs` only parses arguments and maps errors to exit codes.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::Path;

use thiserror::Error;

pub mod args;
pub mod commands;
pub mod config;

pub use args::run;
pub use config::{ConfigFile, PipelineConfig};

pub const EXIT_OK: i32 = 0;
/// Validation or evaluation failure under `--strict`.
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
/// I/O or parse error.
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failed(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Data(#[from] anyhow::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failed(_) => EXIT_FAILED,
            CliError::Io { .. } | CliError::Data(_) => EXIT_DATA,
        }
    }
}
