use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: parse error at frame {frame}: {message}")]
    Parse {
        path: String,
        frame: usize,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("session too short: {rows} frames, need at least {min}")]
    SessionTooShort { rows: usize, min: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid synthetic spec: {0}")]
    Spec(String),

    #[error("invalid sample container: {0}")]
    Container(String),

    #[error("alpha undefined for {patient_id}/{game_id}: total KL score is {total}")]
    UndefinedAlpha {
        patient_id: String,
        game_id: String,
        total: f64,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
