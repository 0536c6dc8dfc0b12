use std::path::PathBuf;

use ecload_core::ErrorKind;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] ecload_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
}

pub type Result<T, E = AppError> = std::result::Result<T, E>;

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        AppError::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            AppError::Core(e) => e.kind(),
            AppError::Io { .. } | AppError::Format { .. } => ErrorKind::Data,
            AppError::Usage(_) => ErrorKind::Usage,
        }
    }

    /// 1 usage, 2 data, 3 solver or training failure.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Solver => 3,
        }
    }

    pub fn to_json(&self) -> String {
        let kind = match self.kind() {
            ErrorKind::Usage => "usage",
            ErrorKind::Data => "data",
            ErrorKind::Solver => "solver",
        };
        json!({"error": {"kind": kind, "exit_code": self.exit_code(), "message": self.to_string()}}).to_string()
    }
}
