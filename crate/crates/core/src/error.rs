use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DbcError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: String,
    },

    #[error("{matrix}: column {column} sums to {sum} (expected 1)")]
    NotStochastic {
        matrix: String,
        column: usize,
        sum: f64,
    },

    #[error("{what} = {value} lies outside [{lo}, {hi}]")]
    Domain {
        what: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("linear program failed: {0}")]
    Solver(String),

    #[error("parse error in {field}: {message}")]
    Parse { field: String, message: String },
}

impl DbcError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        DbcError::InvalidInput(msg.into())
    }

    pub(crate) fn domain(what: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        DbcError::Domain {
            what: what.into(),
            value,
            lo,
            hi,
        }
    }

    pub(crate) fn mismatch(expected: usize, got: usize, context: impl Into<String>) -> Self {
        DbcError::DimensionMismatch {
            expected,
            got,
            context: context.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, DbcError>;
