use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("workspace grid does not contain the sampled point ({0:.3}, {1:.3}, {2:.3})")]
    GridTooSmall(f64, f64, f64),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("no candidate passed the Kapandji test with a balance score below {threshold}%")]
    NoFeasibleCandidate { threshold: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
