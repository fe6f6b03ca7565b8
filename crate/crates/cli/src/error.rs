use std::path::PathBuf;

use tapdip_core::Error as CoreError;

/// Command failures, each mapped to a stable exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Ingest(#[source] CoreError),
    #[error("input error: {0}")]
    BadInput(String),
    #[error(transparent)]
    Solver(#[from] CoreError),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Ingest(_) | CliError::BadInput(_) => 3,
            CliError::Solver(e) => match e {
                CoreError::InvalidParameter(_) => 2,
                CoreError::Io { .. }
                | CoreError::MalformedLine { .. }
                | CoreError::EmptyGraph(_)
                | CoreError::UnknownNode(_) => 3,
                CoreError::Infeasible(_) | CoreError::UnreachableTrigger { .. } => 4,
                CoreError::SampleCapExceeded { .. } => 5,
            },
            CliError::Output { .. } => 1,
        }
    }
}
