use std::path::Path;

use serde_json::json;
use thiserror::Error;

use crate::config::ConfigError;

/// Exit codes: 0 ok, 2 configuration, 3 numerical failure, 4 I/O.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    pub fn numeric(e: impl std::fmt::Display) -> Self {
        CliError::Numeric(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    /// One-line JSON error record for stderr.
    pub fn record(&self) -> String {
        let v = match self {
            CliError::Config(c) => json!({
                "status": "error",
                "kind": "config",
                "exit_code": 2,
                "key": c.key,
                "line": c.line,
                "message": c.message,
            }),
            CliError::Numeric(m) => json!({
                "status": "error",
                "kind": "numeric",
                "exit_code": 3,
                "message": m,
            }),
            CliError::Io { path, message } => json!({
                "status": "error",
                "kind": "io",
                "exit_code": 4,
                "path": path,
                "message": message,
            }),
        };
        v.to_string()
    }
}
