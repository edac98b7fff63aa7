use std::path::PathBuf;

/// Errors produced across the odometry and mapping pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: PathBuf, reason: String },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("config error at line {line}, key `{key}`: {reason}")]
    Config {
        line: usize,
        key: String,
        reason: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point cloud has no per-point timestamps")]
    MissingTimestamps,

    #[error("under-determined registration: {rows} observation rows (need at least 6)")]
    UnderDetermined { rows: usize },

    #[error("degenerate system: {direction} unobservable (condition number {condition:.3e})")]
    Degenerate { direction: String, condition: f64 },

    #[error("registration failed: {0}")]
    RegistrationFailed(String),

    #[error("pose graph is disconnected: components {components:?}")]
    Disconnected { components: Vec<Vec<usize>> },

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
