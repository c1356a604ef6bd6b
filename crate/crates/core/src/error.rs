use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("no entries in {path}")]
    EmptyDataset { path: PathBuf },

    #[error("ratios must sum to 1 (got {0}, {1}, {2})")]
    InvalidRatios(f64, f64, f64),

    #[error("too few entries to split: {n} entries cannot give each partition at least one")]
    TooFewEntries { n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("empty evaluation set")]
    EmptyEvalSet,

    #[error("training diverged (non-finite factors) at eta={eta}, lambda={lambda}")]
    Diverged { eta: f64, lambda: f64 },

    #[error("all {q} particles diverged at iteration {t}")]
    AllParticlesDiverged { t: usize, q: usize },

    #[error("unknown user id {0:?}")]
    UnknownUser(String),

    #[error("unknown item id {0:?}")]
    UnknownItem(String),

    #[error("malformed file {path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
