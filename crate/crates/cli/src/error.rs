//! Error kinds of the harness, each mapped to a process exit code.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl CliError {
    /// Syntax and truncation errors are parse errors; anything serde reports
    /// about the shape of well-formed JSON is a schema error.
    pub fn from_json(e: serde_json::Error) -> Self {
        use serde_json::error::Category;
        match e.classify() {
            Category::Syntax | Category::Eof => Self::Parse(e.to_string()),
            Category::Data => Self::Schema(e.to_string()),
            Category::Io => Self::Runtime(e.to_string()),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Parse(_) => 2,
            Self::Schema(_) => 3,
            Self::Runtime(_) => 4,
        }
    }
}

impl From<metastable_core::Error> for CliError {
    fn from(e: metastable_core::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}
