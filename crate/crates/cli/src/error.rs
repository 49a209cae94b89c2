//! Command errors and their process exit codes.

use std::fmt;

use mumkit_core::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    /// Bad flags, config or input files.
    Usage = 1,
    /// At least one evaluator failed; the others completed.
    Partial = 2,
    /// Mixed manifests, replay divergence or another broken invariant.
    Invariant = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self {
            code: ExitCode::Usage,
            message: msg.into(),
        }
    }

    pub fn invariant(msg: impl Into<String>) -> Self {
        Self {
            code: ExitCode::Invariant,
            message: msg.into(),
        }
    }

    pub fn partial(msg: impl Into<String>) -> Self {
        Self {
            code: ExitCode::Partial,
            message: msg.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::VersionMismatch(_) | Error::CacheMiss(_) => ExitCode::Invariant,
            Error::Transport { .. } => ExitCode::Partial,
            _ => ExitCode::Usage,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}
