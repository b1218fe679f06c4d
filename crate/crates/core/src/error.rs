use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("entry {index} ({row}, {col}) out of bounds for {nrows}x{ncols} matrix")]
    EntryOutOfBounds {
        index: usize,
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },

    #[error("column index {col} does not fit the index type")]
    IndexOverflow { col: usize },

    #[error("invalid CSR: {0}")]
    InvalidCsr(String),

    #[error("dense data length {len} does not match {nrows}x{dim}")]
    DenseLength {
        len: usize,
        nrows: usize,
        dim: usize,
    },

    #[error("non-finite value {value} at position {index}")]
    NonFinite { index: usize, value: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("worker count must be at least 1")]
    ZeroWorkers,

    #[error("pattern {0:?} has no specialized kernel")]
    NotSpecialized(crate::ops::KnownPattern),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReferenceError {
    #[error(transparent)]
    Kernel(#[from] KernelError),

    #[error("message shape {found} does not match operator spec (expected {expected})")]
    ShapeTag {
        expected: &'static str,
        found: &'static str,
    },

    #[error("failed to allocate {bytes} bytes for materialized edge messages")]
    Allocation { bytes: usize },

    #[error("dense oracle refuses {m}x{n} (limit {limit} entries)")]
    OracleTooLarge { m: usize, n: usize, limit: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
}
