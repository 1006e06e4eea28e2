use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid format: {0}")]
    Format(String),

    #[error("truncated input: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("nothing to learn from: {0}")]
    Unlearnable(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing data files under {root}:\n{}", list_paths(.paths))]
    MissingData { root: PathBuf, paths: Vec<PathBuf> },

    #[error("cell {cell} failed: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<Error>,
    },

    #[error("incomplete results, missing cells: {}", .0.join(", "))]
    IncompleteGrid(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn list_paths(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| format!("  {}", p.display()))
        .collect::<Vec<_>>()
        .join("\n")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
