use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Bound violations carry the inequality that failed so that callers (and the
/// CLI) can report it verbatim.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("numeric overflow: {0}")]
    Overflow(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A reconstruction limit (ordering parameter, efficiency, aliasing) is violated.
    #[error("bound violated: {0}")]
    Bound(String),

    #[error("grid kind mismatch: expected {expected} grid, dataset carries {found} grid")]
    GridKind { expected: String, found: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("grid point {0} has no measurement records")]
    UnsampledGridPoint(usize),

    #[error("covariance matrix is singular or unphysical: {0}")]
    Covariance(String),

    #[error("undefined result: {0}")]
    Undefined(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for violations of a reconstruction limit.
    pub fn is_bound(&self) -> bool {
        matches!(self, Error::Bound(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
