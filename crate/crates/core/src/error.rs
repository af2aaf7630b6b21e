use std::fmt;

/// Crate-wide error type.
#[derive(Debug)]
pub enum Error {
    /// Input outside the mathematical domain of an operation (NaN, infinity).
    Domain(String),
    /// Dimension or length mismatch; shapes are never silently broadcast.
    Shape(String),
    /// An operation was called on the wrong machine kind or in an invalid way.
    Usage(String),
    /// A delayed-value lookup fell outside the stored history span.
    History(String),
    /// A state left the finite/bounded region during evolution; `t` is the
    /// time at which the blow-up was detected.
    Diverged { t: f64 },
    /// Malformed model or data file.
    Format(String),
    Io(std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Shape(msg) => write!(f, "shape error: {msg}"),
            Error::Usage(msg) => write!(f, "usage error: {msg}"),
            Error::History(msg) => write!(f, "history error: {msg}"),
            Error::Diverged { t } => write!(f, "trajectory diverged at t = {t}"),
            Error::Format(msg) => write!(f, "format error: {msg}"),
            Error::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}
