use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A distribution parameter lies outside the region where the fourth
    /// moment is finite.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("degenerate direction: {0}")]
    DegenerateDirection(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("rank deficiency: {0}")]
    Rank(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate test: {0}")]
    DegenerateTest(String),

    #[error("selection error: {0}")]
    Selection(String),

    #[error("degenerate sign: {0}")]
    DegenerateSign(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Io(err.to_string())
    }
}
