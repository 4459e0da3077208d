use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(String),

    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}, column {column}: cannot parse {value:?} as a finite number")]
    BadCell {
        line: usize,
        column: usize,
        value: String,
    },

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("sample too small: {what} requires n >= {min}, got n = {n}")]
    TooSmall {
        what: &'static str,
        min: usize,
        n: usize,
    },

    #[error("sample too large: {what} refuses n > {max}, got n = {n}")]
    TooLarge {
        what: &'static str,
        max: usize,
        n: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("series did not converge after {terms} terms (partial value {partial:e}, last term {last_term:e})")]
    SeriesDivergence {
        terms: usize,
        partial: f64,
        last_term: f64,
    },

    #[error("quadrature did not reach tolerance: estimate {estimate:e}, error bound {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("{0} is not finite for this distribution")]
    Infinite(&'static str),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from the file system rather than from the input values.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Csv(e) => e.is_io_error(),
            _ => false,
        }
    }
}
