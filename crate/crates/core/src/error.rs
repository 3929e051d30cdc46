use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid sizes, counts or settings.
    #[error("configuration error: {0}")]
    Config(String),

    /// A configuration file key that is unknown, missing or malformed.
    #[error("configuration key `{key}`: {reason}")]
    ConfigKey { key: String, reason: String },

    /// Mismatched dimensions between arguments.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical failure{}: {detail}", .iteration.map(|i| format!(" at iteration {i}")).unwrap_or_default())]
    Numerical {
        iteration: Option<usize>,
        detail: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn numerical(detail: impl Into<String>) -> Self {
        Error::Numerical {
            iteration: None,
            detail: detail.into(),
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        match self {
            Error::Numerical { detail, .. } => Error::Numerical {
                iteration: Some(iteration),
                detail,
            },
            other => other,
        }
    }

    /// True for errors caused by user-supplied configuration.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::ConfigKey { .. } | Error::Domain(_)
        )
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical { .. })
    }
}
