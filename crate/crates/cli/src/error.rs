use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("scenario: {0}")]
    Spec(String),
    #[error(transparent)]
    Map(#[from] esdfmap::Error),
}

impl ReplayError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ReplayError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 for internal corruption, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            ReplayError::Map(e) if e.is_corruption() => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = ReplayError> = std::result::Result<T, E>;
