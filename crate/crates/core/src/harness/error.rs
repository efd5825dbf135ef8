use std::path::PathBuf;

use thiserror::Error;

use crate::bandit::BanditError;
use crate::model::ModelError;
use crate::oracle::OracleError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid model: {0}")]
    Model(#[from] ModelError),
    #[error("learner: {0}")]
    Bandit(#[from] BanditError),
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("sweep axis `{0}` has no values")]
    EmptyAxis(String),
    #[error("slot {slot}: conservation audit failed: {detail}")]
    Conservation { slot: u64, detail: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

impl HarnessError {
    /// Stable machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Model(_) | HarnessError::Config(_) | HarnessError::EmptyAxis(_) => "validation",
            HarnessError::Parse { .. } => "parse",
            HarnessError::Bandit(_) => "learner",
            HarnessError::Oracle(_) => "oracle",
            HarnessError::Conservation { .. } => "audit",
            HarnessError::Io { .. } | HarnessError::Csv(_) | HarnessError::Json(_) => "io",
            HarnessError::Pool(_) => "runtime",
        }
    }
}
