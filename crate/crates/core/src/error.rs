use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// Inconsistent or unusable configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// The discrete solution became non-finite.
    #[error("solution exploded at step {step}")]
    Explosion { step: usize },
    /// A sample set was empty where data is required.
    #[error("empty sample: {0}")]
    EmptySample(&'static str),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
