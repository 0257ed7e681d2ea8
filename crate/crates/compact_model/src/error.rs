use thiserror::Error;

#[derive(Debug, Error)]
pub enum CompactModelError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unfit data: {0}")]
    UnfitData(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
