use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used for CLI exit codes and the C error codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
    Io,
}

impl ErrorKind {
    /// Process exit code for this failure class. Zero is reserved for success.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
            ErrorKind::Io => 5,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite gradient in {net} layer {layer}")]
    NonFiniteGradient { net: String, layer: usize },

    #[error("non-finite loss in the {term} term")]
    NonFiniteLoss { term: &'static str },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("failed to load {}: {message}", path.display())]
    Load { path: PathBuf, message: String },

    #[error("R² undefined: target variance is zero")]
    UndefinedR2,

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArchitecture(_)
            | Error::InvalidConfig(_)
            | Error::InvalidState(_)
            | Error::Schema(_) => ErrorKind::Config,
            Error::Data(_)
            | Error::InsufficientData { .. }
            | Error::EmptyDataset
            | Error::Load { .. }
            | Error::Shape(_) => ErrorKind::Data,
            Error::NonFiniteGradient { .. } | Error::NonFiniteLoss { .. } | Error::UndefinedR2 => {
                ErrorKind::Numeric
            }
            Error::Io { .. } | Error::Format { .. } => ErrorKind::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn load(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Load {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl std::fmt::Display) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
