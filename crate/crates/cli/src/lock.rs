//! One command per output directory.
//!
//! The lock is the file `<out>/.mumkit.lock`, created exclusively and
//! holding the owner's process id and command name. It is removed when the
//! guard drops. A crashed command leaves the file behind; delete it by hand
//! once no command is running.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub const LOCK_FILE: &str = ".mumkit.lock";

#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(out_dir: &Path, command: &str) -> Result<Self, CliError> {
        std::fs::create_dir_all(out_dir)
            .map_err(|e| CliError::usage(format!("cannot create {}: {e}", out_dir.display())))?;
        let path = out_dir.join(LOCK_FILE);
        let mut f = OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                let holder = std::fs::read_to_string(&path).unwrap_or_default();
                CliError::usage(format!(
                    "{} is locked by another command ({}); remove {} if it is stale",
                    out_dir.display(),
                    holder.trim(),
                    path.display()
                ))
            } else {
                CliError::usage(format!("cannot create lock {}: {e}", path.display()))
            }
        })?;
        let _ = writeln!(f, "pid {} {command}", std::process::id());
        Ok(Self { path })
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}
