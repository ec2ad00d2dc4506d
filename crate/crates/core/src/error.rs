use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a function (e.g. negative stake).
    #[error("domain error: {0}")]
    Domain(String),

    /// A model parameter is out of its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A linear system or closed form is singular at the requested point.
    #[error("singular: {0}")]
    Singular(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Accounting broke (negative balance, non-finite metric).
    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error{}: {source}", context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default())]
    Io {
        context: Option<String>,
        #[source]
        source: io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io_with(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            context: Some(context.into()),
            source,
        }
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parameter(_) => 2,
            Error::Io { .. } | Error::Csv(_) => 4,
            _ => 3,
        }
    }
}

impl From<io::Error> for Error {
    fn from(source: io::Error) -> Self {
        Error::Io {
            context: None,
            source,
        }
    }
}
