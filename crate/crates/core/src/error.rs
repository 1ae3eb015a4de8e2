use thiserror::Error;

/// Errors reported by the matrix, kernel and factorization layers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// Operand shapes are not conformal for the requested operation.
    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    /// A split index, pivot index or window lies outside the matrix.
    #[error("index out of range in {op}: {index} not in 0..={limit}")]
    OutOfRange {
        op: &'static str,
        index: usize,
        limit: usize,
    },

    /// Leading dimension smaller than the row count.
    #[error("leading dimension {ld} is smaller than row count {rows}")]
    LeadingDimension { ld: usize, rows: usize },

    /// A blocking, team or policy parameter is invalid.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
