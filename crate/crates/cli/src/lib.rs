//! Command-line pipeline over `mumkit-core`: `build`, `run`, `fit`,
//! `report` and `replay`, driven by one TOML config.

pub mod commands;
pub mod config;
pub mod error;
pub mod lock;
pub mod manifest;

use std::path::Path;

pub use commands::{Context, Flags, Summary, TaskSel};
pub use config::{Overrides, RunConfig};
pub use error::{CliError, ExitCode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Build,
    Run,
    Fit,
    Report,
    Replay,
}

/// Loads the config, applies overrides and runs one command.
pub fn execute(config: &Path, overrides: &Overrides, flags: Flags, command: Command) -> Result<Summary, CliError> {
    let mut cfg = RunConfig::load(config)?;
    cfg.apply(overrides);
    let ctx = Context::new(cfg, flags)?;
    match command {
        Command::Build => commands::cmd_build(&ctx),
        Command::Run => commands::cmd_run(&ctx),
        Command::Fit => commands::cmd_fit(&ctx),
        Command::Report => commands::cmd_report(&ctx),
        Command::Replay => commands::cmd_replay(&ctx),
    }
}
