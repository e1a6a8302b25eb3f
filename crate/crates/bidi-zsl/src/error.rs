use std::path::PathBuf;

use bidi_zsl_core::ZslError;
use thiserror::Error;

/// Errors raised by the harness: file formats, configuration, searches and
/// pipeline stages.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed file content. `line` is 1-based; 0 when the problem is not
    /// tied to a line (binary files).
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("configuration: {0}")]
    Config(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("search: {0}")]
    Search(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: ZslError,
    },

    #[error(transparent)]
    Core(#[from] ZslError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    /// Stable machine-readable category.
    pub fn category(&self) -> &'static str {
        match self {
            HarnessError::Io { .. } => "io",
            HarnessError::Parse { .. } => "parse",
            HarnessError::Config(_) => "config",
            HarnessError::Usage(_) => "usage",
            HarnessError::Search(_) => "search",
            HarnessError::Stage { source, .. } | HarnessError::Core(source) => source.category(),
            HarnessError::Json(_) => "parse",
        }
    }

    /// Process exit code for the category.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "usage" => 2,
            "io" => 3,
            "parse" => 4,
            "config" => 5,
            "search" => 6,
            _ => 7,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        HarnessError::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

/// Attaches a pipeline stage name to core errors.
pub(crate) trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for std::result::Result<T, ZslError> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|source| HarnessError::Stage { stage, source })
    }
}
