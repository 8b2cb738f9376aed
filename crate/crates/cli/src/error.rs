use std::path::PathBuf;

use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ragkit::Error),

    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{}: {message}", path.display())]
    Data { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn data(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Data {
            path: path.into(),
            message: message.into(),
        }
    }

    /// 0 success, 1 usage or configuration, 2 data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        use ragkit::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(E::InvalidParameter(_)) => 1,
            CliError::Core(E::Domain(_) | E::DistortionExhausted(_)) => 3,
            CliError::Core(_) => 2,
            CliError::Io { .. } | CliError::Csv { .. } | CliError::Data { .. } | CliError::Json { .. } => 2,
        }
    }
}
