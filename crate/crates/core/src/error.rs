use thiserror::Error;

/// Failure categories surfaced by the library.
///
/// The CLI maps these onto process exit codes, so new variants should be
/// slotted into one of the existing families rather than invented ad hoc.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs are individually valid but mutually inconsistent.
    #[error("validation error: {0}")]
    Validation(String),

    /// Matrix dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A matrix that must be inverted or factored is too ill-conditioned.
    #[error("ill-conditioned: {0}")]
    Conditioning(String),

    /// The requested combination is not supported.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A computed quantity is not finite.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Problem in a run configuration or scenario file.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn conditioning(msg: impl Into<String>) -> Self {
        Error::Conditioning(msg.into())
    }
}
