use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// Variants are grouped by [`ErrorKind`] so callers (the CLI in particular)
/// can map them onto exit codes without matching every case.
#[derive(Debug, Error)]
pub enum Error {
    #[error("record '{record}': invalid residue '{symbol}' at position {position}")]
    Validation {
        record: String,
        position: usize,
        symbol: char,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("sequence of length {len} is too short (need more than {min})")]
    TooShort { len: usize, min: usize },
    #[error("invalid state: {0}")]
    State(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("network error{}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Network { status: Option<u16>, message: String },
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("length error: {0}")]
    Length(String),
    #[error("loss mask selects no positions")]
    EmptyMask,
    #[error("prompt error: {0}")]
    Prompt(String),
    #[error("graph error: {0}")]
    Graph(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("generation error: {0}")]
    Generation(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad configuration or invocation.
    Usage,
    /// Bad or unreadable input data.
    Data,
    /// Numerical failure during training or inference.
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Prompt(_) => ErrorKind::Usage,
            Error::Numeric(_) | Error::Graph(_) | Error::Generation(_) | Error::EmptyMask => {
                ErrorKind::Numeric
            }
            _ => ErrorKind::Data,
        }
    }

    /// Short machine-readable tag, e.g. `"ValidationError"`.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::Validation { .. } => "ValidationError",
            Error::Format(_) => "FormatError",
            Error::TooShort { .. } => "TooShortError",
            Error::State(_) => "StateError",
            Error::Config(_) => "ConfigError",
            Error::Network { .. } => "NetworkError",
            Error::EmptyInput(_) => "EmptyInputError",
            Error::Decode(_) => "DecodeError",
            Error::Length(_) => "LengthError",
            Error::EmptyMask => "EmptyMaskError",
            Error::Prompt(_) => "PromptError",
            Error::Graph(_) => "GraphError",
            Error::Numeric(_) => "NumericError",
            Error::Integrity(_) => "IntegrityError",
            Error::Generation(_) => "GenerationError",
            Error::Io(_) => "IoError",
            Error::Json(_) => "JsonError",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
