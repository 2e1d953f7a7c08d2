use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of its admissible range. `field` is the
    /// dotted path of the offending key.
    #[error("invalid configuration at `{field}`: {message}")]
    Config { field: String, message: String },

    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An internal invariant was broken during a run.
    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("cannot parse configuration: {0}")]
    Parse(#[from] toml::de::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
