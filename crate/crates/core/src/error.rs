use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a precondition (mismatched sizes, crossing partition, bad word).
    #[error("domain error: {0}")]
    Domain(String),

    /// A size limit was exceeded (enumeration cap, dense-matrix cap).
    #[error("size limit exceeded: {0}")]
    Size(String),

    /// The requested numerical regime is not supported, e.g. D < k for Weingarten inversion.
    #[error("unsupported regime: {0}")]
    Regime(String),

    #[error("missing moment for word {0}")]
    MissingMoment(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors that report an unsupported numerical regime rather than bad input.
    pub fn is_regime(&self) -> bool {
        matches!(self, Error::Regime(_) | Error::Linalg(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
