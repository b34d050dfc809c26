use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("polyhedron is unbounded: {0}")]
    Unbounded(String),

    #[error("polyhedron is empty: {0}")]
    Empty(String),

    #[error("vertex enumeration refused: {subsets} active-set candidates in dimension {dim} exceed the cap of {cap}")]
    EnumerationCap {
        dim: usize,
        subsets: u128,
        cap: u128,
    },

    #[error("problem too large: {vars} decision variables exceed the budget of {cap} ({detail})")]
    MemoryBudget {
        vars: usize,
        cap: usize,
        detail: String,
    },

    #[error("LP solver failure{}: {message}", row.map(|r| format!(" (row {r})")).unwrap_or_default())]
    Solver { message: String, row: Option<usize> },

    #[error("{path}, line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn solver(msg: impl Into<String>) -> Self {
        Error::Solver {
            message: msg.into(),
            row: None,
        }
    }
}
