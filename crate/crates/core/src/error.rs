use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter violates its invariant.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// Input data cannot be processed (empty cloud, too few poses, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Degenerate scale estimation (zero mean step length).
    #[error("scale estimation failed: {0}")]
    Scale(String),

    /// A file could not be parsed; `line` is 1-based.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// A configuration value is unknown or violates the owning invariant.
    #[error("config error: `{key}`: {msg}")]
    Config { key: String, msg: String },

    /// Initial pose determination failed.
    #[error("initialization failed: {0}")]
    Initialization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
