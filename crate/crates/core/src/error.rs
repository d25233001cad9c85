use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a domain precondition (out-of-range value,
    /// invalid schedule, |beta| >= 1, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Dimensions of two objects do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A setting or outcome index was out of range.
    #[error("index out of range: {0}")]
    Index(String),

    /// The instance exceeds a configured enumeration cap.
    #[error("instance too large: {0}")]
    TooLarge(String),

    /// A postselected correlator has zero kept weight in a required cell.
    #[error("empty postselection cell: {0}")]
    EmptyCell(String),

    /// The requested model class provably cannot reproduce the input table.
    #[error("not explainable by the requested model class: {0}")]
    NotExplainable(String),

    /// A run or tool configuration failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
