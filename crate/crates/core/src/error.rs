use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid parameters; `key` names the offending setting.
    #[error("configuration error in `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("numerical divergence at t = {t}: {reason}")]
    Divergence { t: f64, reason: String },

    #[error("cost guard: {0}")]
    CostGuard(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("support violation: {0}")]
    Support(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("under-resolved: {0}")]
    UnderResolved(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
