use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum WgError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Text-format parse failure; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("geometry error: {0}")]
    Geometry(String),

    /// Linear-algebra failure (singular/indefinite local system and the like).
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, WgError>;
