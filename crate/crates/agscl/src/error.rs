use std::fmt;
use std::path::PathBuf;

use agscl_core::Error as CoreError;

/// Application-level failures, each mapped to a process exit code.
#[derive(Debug)]
pub enum AppError {
    Core(CoreError),
    Io { path: PathBuf, source: std::io::Error },
    Json { path: PathBuf, message: String },
    Checkpoint(String),
    Cli(String),
}

impl AppError {
    /// 0 success, 1 configuration/usage, 2 data, 3 numeric abort.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Core(CoreError::Numeric(_)) => 3,
            AppError::Core(CoreError::Data(_))
            | AppError::Core(CoreError::Format { .. }) => 2,
            AppError::Core(_) => 1,
            AppError::Io { .. } | AppError::Checkpoint(_) => 2,
            AppError::Json { .. } | AppError::Cli(_) => 1,
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Core(e) => write!(f, "{e}"),
            AppError::Io { path, source } => write!(f, "io error on {}: {source}", path.display()),
            AppError::Json { path, message } => {
                write!(f, "json error in {}: {message}", path.display())
            }
            AppError::Checkpoint(m) => write!(f, "checkpoint error: {m}"),
            AppError::Cli(m) => write!(f, "usage error: {m}"),
        }
    }
}

impl std::error::Error for AppError {}

impl From<CoreError> for AppError {
    fn from(e: CoreError) -> Self {
        AppError::Core(e)
    }
}

pub fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> AppError {
    let path = path.into();
    move |source| AppError::Io { path, source }
}

pub type AppResult<T> = Result<T, AppError>;
