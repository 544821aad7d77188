use std::path::PathBuf;

/// Errors raised by the detection pipeline and its building blocks.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("parse error at row {row}, column {col}: {message}")]
    Parse {
        row: usize,
        col: usize,
        message: String,
    },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("range error: interval [{start}, {end}] is invalid for a series of length {len}")]
    Range { start: usize, end: usize, len: usize },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid wavelet scale {0}: scales must lie in -20..=-1")]
    Scale(i32),

    #[error("length error: {0}")]
    Length(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
