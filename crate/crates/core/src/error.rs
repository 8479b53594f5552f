use std::path::PathBuf;

/// Errors produced by frame construction, solvers, estimators and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        actual: (usize, usize, usize),
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("zero-power input: {0}")]
    ZeroPower(&'static str),

    #[error("envelope {0} is identically zero")]
    ZeroEnvelope(usize),

    #[error("frame is not Parseval-normalized")]
    NotNormalized,

    #[error("solver diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("rank-deficient system: rank {rank} < {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no match: {0}")]
    NoMatch(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors that stem from user input or configuration rather
    /// than from the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Parse { .. }
                | Error::Io { .. }
                | Error::InvalidParameter(_)
                | Error::LengthMismatch { .. }
                | Error::ShapeMismatch { .. }
                | Error::IndexOutOfRange(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
