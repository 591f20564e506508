use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: line {line}: value {value} looks like pixels; pass intrinsics")]
    UnitMismatch { path: PathBuf, line: u64, value: f64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid data: {0}")]
    Data(String),
    #[error("estimation failed: {0}")]
    Estimation(#[from] cecme::Error),
    #[error("all {trials} trials failed at sweep value {value}; last error: {last}")]
    AllTrialsFailed { value: f64, trials: usize, last: cecme::Error },
}

impl BenchError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 config, 3 data, 4 estimation.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Parse { .. } | Self::UnitMismatch { .. } | Self::Io { .. } | Self::Data(_) => 3,
            Self::Estimation(_) | Self::AllTrialsFailed { .. } => 4,
        }
    }
}
