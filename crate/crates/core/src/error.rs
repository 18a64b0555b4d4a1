use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("numeric fault: {0}")]
    Numeric(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("malformed {kind} file: {message}")]
    Format { kind: &'static str, message: String },
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn format(kind: &'static str, msg: impl Into<String>) -> Self {
        Error::Format {
            kind,
            message: msg.into(),
        }
    }

    /// Short machine-readable tag used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::Contract(_) => "contract",
            Error::Numeric(_) => "numeric",
            Error::Config(_) => "config",
            Error::Format { .. } => "format",
            Error::Stage { .. } => "stage",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            got,
        })
    }
}
