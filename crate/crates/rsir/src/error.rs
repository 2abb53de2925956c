use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input line in an interaction log.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Invalid configuration value or unknown key.
    #[error("config error: {0}")]
    Config(String),

    /// Preprocessing removed every user/item.
    #[error("empty corpus after filtering")]
    EmptyCorpus,

    /// An API precondition was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Checkpoint file is unreadable, truncated or of the wrong kind.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Arithmetic outside the valid parameter domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code category for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Parse { .. } | Error::EmptyCorpus => 3,
            Error::Io(_) => 4,
            Error::Checkpoint(_) => 5,
            Error::Contract(_) | Error::Domain(_) => 6,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
