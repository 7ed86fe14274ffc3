//! Error type shared by every layer of the framework.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid run or solver parameters. `field` names the offending setting.
    #[error("configuration error in `{field}`: {reason}")]
    Configuration { field: String, reason: String },

    /// An operation was invoked out of the order the protocol allows.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// Input data does not fit the slot it is handed to.
    #[error("data error: {0}")]
    Data(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("transport error: {0}")]
    Transport(String),

    /// No rank can make progress although not every rank has exited.
    #[error("protocol deadlock: {0}")]
    Deadlock(String),

    #[error("run exceeded the {0} s time limit")]
    Timeout(f64),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Configuration {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Configuration { .. } => 2,
            Error::Protocol(_) | Error::Data(_) | Error::Transport(_) | Error::Deadlock(_) => 3,
            Error::Numerical(_) => 4,
            Error::Timeout(_) | Error::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
