use thiserror::Error;

/// Command failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed input record, at a 1-based line number when known.
    #[error("{}schema error: {msg}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Schema { line: Option<usize>, msg: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("training aborted: {0}")]
    TrainingAbort(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn schema(line: usize, msg: impl Into<String>) -> Self {
        CliError::Schema {
            line: Some(line),
            msg: msg.into(),
        }
    }

    pub fn schema_msg(msg: impl Into<String>) -> Self {
        CliError::Schema {
            line: None,
            msg: msg.into(),
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    /// 2 for schema and configuration errors, 3 for training aborts, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. } | CliError::Config(_) => 2,
            CliError::TrainingAbort(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}
