use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("header does not match schema: expected {expected:?}, found {found:?}")]
    HeaderMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("need at least 2 classes, found {0}")]
    TooFewClasses(usize),

    #[error("all feature columns were removed during preprocessing")]
    NoFeatures,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("target band {target:.6} is never reached by the curve (asymptote {alpha:.6})")]
    Unreachable { alpha: f64, target: f64 },

    #[error("degenerate curve: gamma = 0 with beta > 0")]
    DegenerateCurve,

    #[error("incomplete result store: {} task(s) missing, e.g. (size, fold, rep) = {}", .missing.len(), preview_keys(.missing))]
    IncompleteStore { missing: Vec<(usize, usize, usize)> },

    #[error("{0}")]
    Task(String),
}

fn preview_keys(keys: &[(usize, usize, usize)]) -> String {
    let mut s: Vec<String> = keys.iter().take(5).map(|k| format!("{k:?}")).collect();
    if keys.len() > 5 {
        s.push("...".into());
    }
    s.join(", ")
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
