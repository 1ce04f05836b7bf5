use serde_json::{json, Map, Value};
use thiserror::Error;

/// Everything that can end a command. Usage and config problems exit with 1,
/// data and domain problems with 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] ar_bridge::Error),

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    /// Malformed input data (unparsable numbers, missing values, bad columns).
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn io(path: impl Into<String>, err: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.into(), message: err.to_string() }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.code(),
            CliError::Io { .. } => "io",
            CliError::Data(_) => "data",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Core(ar_bridge::Error::Config(_)) => 1,
            _ => 2,
        }
    }

    fn details(&self) -> Map<String, Value> {
        let mut m = Map::new();
        match self {
            CliError::Io { path, .. } => {
                m.insert("path".into(), json!(path));
            }
            CliError::Core(ar_bridge::Error::InsufficientData { needed, got }) => {
                m.insert("needed".into(), json!(needed));
                m.insert("got".into(), json!(got));
            }
            CliError::Core(ar_bridge::Error::SingularFit { order }) => {
                m.insert("order".into(), json!(order));
            }
            _ => {}
        }
        m
    }

    /// Single-line error document `{code, message, context}`.
    pub fn to_json(&self, command: Option<&str>) -> String {
        let mut context = self.details();
        if let Some(c) = command {
            context.insert("command".into(), json!(c));
        }
        json!({ "code": self.code(), "message": self.to_string(), "context": context }).to_string()
    }
}

pub type CliResult<T> = Result<T, CliError>;
