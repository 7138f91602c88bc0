use std::path::PathBuf;

/// Errors raised anywhere in the simulator, trainer or harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value violates a constraint.
    #[error("configuration error: {0}")]
    Config(String),

    /// A function was called outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An API was used in the wrong state or with mismatched shapes.
    #[error("usage error: {0}")]
    Usage(String),

    /// A loss, gradient or parameter became non-finite.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A text input (similarity table, config) failed to parse.
    #[error("{source_name}:{line}:{column}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        column: usize,
        message: String,
    },

    /// A checkpoint does not match the configuration it is loaded against.
    #[error("checkpoint mismatch on `{field}`: checkpoint has {found}, config expects {expected}")]
    CheckpointMismatch {
        field: String,
        found: String,
        expected: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI: 2 config, 3 numerical, 4 i/o, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::CheckpointMismatch { .. } => 2,
            Error::Numerical(_) => 3,
            Error::Io { .. } | Error::Serde(_) => 4,
            Error::Domain(_) | Error::Usage(_) => 1,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
