use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed scene {scene_id}: {reason}")]
    MalformedScene { scene_id: String, reason: String },

    #[error("{file}: row {row}, column `{column}`: {reason}")]
    Schema {
        file: PathBuf,
        row: usize,
        column: String,
        reason: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("only one class present in {0}")]
    SingleClass(&'static str),

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("could not fill the {class} candidate pool: needed {needed}, found {found}")]
    InsufficientPool {
        class: String,
        needed: usize,
        found: usize,
    },

    #[error("infeasible generator configuration: {0}")]
    InfeasibleConfig(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn malformed(scene_id: &str, reason: impl Into<String>) -> Self {
        Error::MalformedScene {
            scene_id: scene_id.to_owned(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
