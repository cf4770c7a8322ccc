use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate environment: no propagation path (LoS disabled and no scatterers)")]
    DegenerateEnvironment,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("corrupt data: {0}")]
    Corrupt(String),

    #[error("non-finite loss at stage {stage}, epoch {epoch}")]
    NonFiniteLoss {
        stage: usize,
        epoch: usize,
        /// CSV rows recorded before the abort.
        partial_report: String,
    },

    #[error("missing file: {0}")]
    MissingFile(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    /// Stable machine-readable category, also used to pick process exit codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Domain(_) | Error::DegenerateEnvironment | Error::Shape(_) => "domain",
            Error::Config(_) => "config",
            Error::Format(_) | Error::Corrupt(_) => "format",
            Error::NonFiniteLoss { .. } => "nan-abort",
            Error::MissingFile(_) => "missing-file",
            Error::Io(_) => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 3,
            "missing-file" => 4,
            "format" => 5,
            "nan-abort" => 6,
            "domain" => 7,
            _ => 8,
        }
    }
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn shape<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}
