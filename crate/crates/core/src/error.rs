use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input{}", .0.as_ref().map(|p| format!(": {}", p.display())).unwrap_or_default())]
    EmptyInput(Option<PathBuf>),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("image {width}x{height} is smaller than one {region_width}-pixel region")]
    ImageTooSmall {
        width: usize,
        height: usize,
        region_width: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("non-finite values in {0}")]
    Numerics(String),

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("no usable samples under {0}")]
    EmptyDataset(PathBuf),

    #[error("{failed} of {total} files failed preprocessing")]
    TooManyFailures { failed: usize, total: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error class. Zero is reserved for success.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Format(_) => 3,
            Error::EmptyInput(_) => 4,
            Error::ImageTooSmall { .. } => 5,
            Error::Config(_) => 6,
            Error::Shape { .. } => 7,
            Error::Numerics(_) => 8,
            Error::Label { .. } => 9,
            Error::EmptyDataset(_) => 10,
            Error::TooManyFailures { .. } => 11,
        }
    }
}
