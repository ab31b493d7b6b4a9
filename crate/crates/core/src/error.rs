use std::fmt;

/// Errors produced by every fallible operation in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A file did not match its container layout (magic, header, payload size).
    #[error("format error: {0}")]
    Format(String),
    /// Input data violated a documented invariant or precondition.
    #[error("validation error: {0}")]
    Validation(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    /// External codec command failed; `status` is the process exit code when one exists.
    #[error("codec command failed ({}): {message}", StatusDisplay(*status))]
    Codec { status: Option<i32>, message: String },
}

struct StatusDisplay(Option<i32>);

impl fmt::Display for StatusDisplay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(code) => write!(f, "exit status {code}"),
            None => write!(f, "terminated by signal"),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

pub(crate) fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}
