//! File formats, the deterministic parallel runner and the subcommands of
//! the `lgbb84` tool. Every command renders its primary output to bytes so
//! that runs, replays and tests can compare outputs exactly.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod runner;
pub mod verify;

use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: u8 = 0;
/// A check the command was asked to perform did not pass.
pub const EXIT_CHECK_FAILED: u8 = 1;
/// `--assert-secure` was given and the verdict was not secure.
pub const EXIT_INSECURE: u8 = 2;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Protocol(#[from] lgbb84_core::protocol::ProtocolError),
    #[error(transparent)]
    Analysis(#[from] lgbb84_core::analysis::AnalysisError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_)
            | CliError::Protocol(_)
            | CliError::Analysis(_)
            | CliError::Json(_) => EXIT_USAGE,
            CliError::Io { .. } | CliError::Csv(_) => EXIT_CHECK_FAILED,
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Output formats for commands that support both.
#[derive(
    Debug,
    Clone,
    Copy,
    PartialEq,
    Eq,
    Default,
    clap::ValueEnum,
    serde::Serialize,
    serde::Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Pretty JSON with a trailing newline.
pub(crate) fn to_json_bytes<T: serde::Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}
