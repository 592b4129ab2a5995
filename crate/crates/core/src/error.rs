use thiserror::Error;

/// Errors produced anywhere in the library.
///
/// The variants are grouped so the command-line front end can map them onto
/// exit codes: argument and domain problems are usage errors, format, row,
/// integrity and range problems are input errors, numeric failures are their
/// own class.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside the mathematical domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller supplied an invalid argument (bad config, count, etc).
    #[error("invalid argument `{name}`: {reason}")]
    Argument { name: String, reason: String },

    /// An iterative method failed to reach its target.
    #[error("numeric failure: {message}")]
    Numeric { message: String },

    /// Adaptive quadrature ran out of evaluations before meeting its
    /// tolerance.
    #[error(
        "quadrature did not converge after {evaluations} evaluations: \
         estimate {estimate:e}, error {error:e}"
    )]
    Quadrature {
        estimate: f64,
        error: f64,
        evaluations: usize,
    },

    /// The input file does not follow the expected layout.
    #[error("format error: {0}")]
    Format(String),

    /// A single data row could not be accepted.
    #[error("line {line}: {reason}")]
    Row { line: u64, reason: String },

    /// Data that parses but is inconsistent (duplicate dates, ...).
    #[error("integrity error: {0}")]
    Integrity(String),

    /// Reading or writing a file failed.
    #[error("I/O error: {0}")]
    Io(String),

    /// Not enough data for the requested computation.
    #[error("insufficient data: need {required} bars, have {available}")]
    Range { required: usize, available: usize },
}

impl Error {
    pub(crate) fn argument(name: &str, reason: impl Into<String>) -> Self {
        Error::Argument {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
