use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible or nonsensical shapes (row/column counts, subset sizes).
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input that makes the requested computation meaningless (constant
    /// feature, single-class labels, zero-variance response, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Normal-equation pivot fell below the rank tolerance.
    #[error("rank-deficient design: pivot {pivot:.3e} below tolerance at column {column}")]
    SingularDesign { column: usize, pivot: f64 },

    /// Residual covariance estimate is not positive definite.
    #[error("singular covariance estimate; shrink toward the diagonal estimate")]
    SingularCovariance,

    /// A previous-step model fits perfectly, so the Gaussian residual code
    /// has no width left to encode against.
    #[error("previous model has zero RSS for response {response}; residual code is degenerate")]
    DegenerateFit { response: usize },

    /// A generator spec cannot be satisfied (e.g. rejection loop exhausted).
    #[error("generator spec infeasible: {0}")]
    Infeasible(String),

    /// CSV cell that failed to parse, with 1-based coordinates.
    #[error("csv parse error at row {row}, column {column}: {message}")]
    CsvCell {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Catch-all for invalid run configurations.
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
