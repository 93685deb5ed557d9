use std::fmt;

/// Errors produced by every fallible operation in the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes do not line up.
    Dimension(String),
    /// A configuration value is out of range or inconsistent.
    Config(String),
    /// An operation was called in the wrong order (e.g. backward before forward).
    State(String),
    /// A NaN or infinity showed up where a finite value is required.
    Numeric(String),
    /// A CSV cell could not be parsed.
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    /// The dataset is missing, empty or too short for the request.
    Data(String),
    /// Filesystem or serialization failure.
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(msg) => write!(f, "dimension error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::State(msg) => write!(f, "state error: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric error: {msg}"),
            Error::Parse {
                row,
                column,
                message,
            } => write!(f, "parse error at row {row}, column '{column}': {message}"),
            Error::Data(msg) => write!(f, "data error: {msg}"),
            Error::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl Error {
    /// Prefix the message with extra context (epoch, batch, parameter name).
    pub fn context(self, ctx: impl fmt::Display) -> Self {
        match self {
            Error::Dimension(m) => Error::Dimension(format!("{ctx}: {m}")),
            Error::Config(m) => Error::Config(format!("{ctx}: {m}")),
            Error::State(m) => Error::State(format!("{ctx}: {m}")),
            Error::Numeric(m) => Error::Numeric(format!("{ctx}: {m}")),
            Error::Data(m) => Error::Data(format!("{ctx}: {m}")),
            Error::Io(m) => Error::Io(format!("{ctx}: {m}")),
            e @ Error::Parse { .. } => e,
        }
    }
}
