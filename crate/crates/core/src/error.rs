use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of a gain formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition was not met by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("integration diverged at t={time:.4}s: {detail}")]
    Integration { time: f64, detail: String },

    #[error("advisor backend failed: {0}")]
    Advisor(String),

    #[error("policy failed: {0}")]
    Policy(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
