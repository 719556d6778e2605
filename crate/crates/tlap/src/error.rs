use std::path::PathBuf;

use tlap_core::Violation;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path} is not a valid scenario:\n{}", list(violations))]
    Invalid { path: PathBuf, violations: Vec<Violation> },
    #[error("{0}")]
    Incompatible(String),
    #[error("grid too large: {0}")]
    GridTooLarge(String),
    #[error(transparent)]
    Solver(#[from] tlap_core::Error),
}

fn list(violations: &[Violation]) -> String {
    violations.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n")
}

impl HarnessError {
    /// 1 for unreadable or invalid input, 2 for everything that goes wrong while solving.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Io { .. } | HarnessError::Parse { .. } | HarnessError::Invalid { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
