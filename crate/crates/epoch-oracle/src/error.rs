//! Error taxonomy shared by every module.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on arguments or shapes was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A text artifact (CSV, profile, network description, model file) failed
    /// to parse; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A persisted artifact was produced by an incompatible schema version.
    #[error("version mismatch: {0}")]
    Version(String),

    /// A linear system or optimization step broke down numerically.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A network layer kind the predictor cannot handle.
    #[error("unsupported layer kind: {0}")]
    UnsupportedLayer(String),

    /// An allocation request exceeded what the host can provide.
    #[error("resource exhausted: {0}")]
    ResourceExhausted(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
