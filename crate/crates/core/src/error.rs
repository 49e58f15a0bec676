use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain of the formula being evaluated.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structurally invalid configuration (missing axis, bad invariant, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The requested parameters fall outside what the implementation supports.
    #[error("unsupported regime: {0}")]
    Unsupported(String),

    /// The data does not constrain the model parameters.
    #[error("model is unidentifiable from the data: {0}")]
    Unidentifiable(String),

    #[error("fit did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for failures of a numerical procedure rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Unidentifiable(_) | Error::NotConverged { .. } | Error::Unsupported(_)
        )
    }
}
