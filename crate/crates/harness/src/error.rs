use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("data error at line {line}: {message}")]
    DataLine { line: u64, message: String },

    #[error(transparent)]
    Booster(#[from] mcboost::Error),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("run aborted after {completed} of {total} rounds: {source}")]
    Aborted {
        completed: usize,
        total: usize,
        #[source]
        source: mcboost::Error,
    },
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 3 for bad input data.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Data(_) | HarnessError::DataLine { .. } => 3,
            _ => 1,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.as_ref().display().to_string(), source }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}
