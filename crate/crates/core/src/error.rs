use std::path::PathBuf;

use thiserror::Error;

use crate::strategy::Strategy;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate item id `{0}`")]
    DuplicateId(String),

    #[error("lexicon has no section for strategy `{0}`")]
    MissingSection(Strategy),

    #[error("lexicon does not cover {strategy}: {}", words.join(", "))]
    Uncovered { strategy: Strategy, words: Vec<String> },

    #[error("modulation level {0} out of range 1..=5")]
    LevelOutOfRange(u8),

    #[error("item `{0}` has no complete importance ranking")]
    Unranked(String),

    #[error("dataset build failed for {} item(s):\n{}", .0.len(), .0.join("\n"))]
    BuildFailures(Vec<String>),

    #[error("audit entry references unknown item {0}")]
    UnknownAuditItem(String),

    #[error("transport failure for evaluator `{evaluator}`: {message}")]
    Transport { evaluator: String, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("version mismatch: {0}")]
    VersionMismatch(String),

    #[error("cache miss in replay mode for evaluator `{0}`")]
    CacheMiss(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
