use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// The variants map onto the CLI exit codes: `Numerical` exits with 3,
/// everything else that reaches the CLI exits with 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Wraps an error raised while processing a single clip.
    #[error("clip `{clip_id}`: {source}")]
    Clip {
        clip_id: String,
        #[source]
        source: Box<Error>,
    },

    /// Wraps an error raised while scoring one ladder level.
    #[error("level {level}: {source}")]
    Level {
        level: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn for_clip(self, clip_id: &str) -> Self {
        Error::Clip {
            clip_id: clip_id.to_string(),
            source: Box::new(self),
        }
    }

    pub(crate) fn for_level(self, level: usize) -> Self {
        Error::Level {
            level,
            source: Box::new(self),
        }
    }

    /// The innermost error, with clip/level context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Clip { source, .. } | Error::Level { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self.root(), Error::Numerical(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
