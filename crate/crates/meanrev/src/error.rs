//! Error type shared across the library.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("timestamps not strictly increasing at row {row}")]
    Ordering { row: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("conditioning failure: {message} (smallest eigenvalue {min_eigenvalue:e})")]
    Conditioning {
        message: String,
        min_eigenvalue: f64,
    },

    #[error("estimation failure: {0}")]
    Estimation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("combinatorial guard exceeded: C({n},{k}) = {count:.3e} supports > {limit:.0e}")]
    CombinatorialGuard {
        n: usize,
        k: usize,
        count: f64,
        limit: f64,
    },
}

impl Error {
    /// CLI exit-code class: 2 for data errors, 3 for numerical errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Parse { .. }
            | Error::Ordering { .. }
            | Error::InsufficientData(_)
            | Error::Shape(_) => 2,
            Error::Conditioning { .. }
            | Error::Estimation(_)
            | Error::Domain(_)
            | Error::CombinatorialGuard { .. } => 3,
        }
    }
}
