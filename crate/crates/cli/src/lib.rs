//! Library half of the `qgrem` command-line tool.
//!
//! Every subcommand is a pure function from a [`RunConfig`] to CSV tables,
//! so the binary only parses arguments, writes files and maps errors to
//! exit codes.

pub mod commands;
pub mod config;
pub mod input;
pub mod output;

use std::fmt;

pub use commands::{run, run_nonhier, run_phase_diagram, run_pressure, run_verify, RunOutput};
pub use config::{Cli, Command, Grid, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Validation,
    Assertion,
    Capacity,
}

impl ErrorKind {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorKind::Usage => 1,
            ErrorKind::Validation => 2,
            ErrorKind::Assertion => 3,
            ErrorKind::Capacity => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::Usage => "usage",
            ErrorKind::Validation => "validation",
            ErrorKind::Assertion => "assertion",
            ErrorKind::Capacity => "capacity",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Usage,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Validation,
            message: message.into(),
        }
    }

    /// One-line JSON rendering for stderr.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({ "error": { "kind": self.kind.name(), "code": self.kind.exit_code(), "message": self.message } })
            .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.kind.name(), self.message)
    }
}

impl std::error::Error for CliError {}

impl From<qgrem::Error> for CliError {
    fn from(e: qgrem::Error) -> Self {
        let kind = match e {
            qgrem::Error::Capacity(_) => ErrorKind::Capacity,
            qgrem::Error::Invalid(_) | qgrem::Error::Domain(_) => ErrorKind::Validation,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
