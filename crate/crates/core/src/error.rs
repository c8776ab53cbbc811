use thiserror::Error;

/// Failure modes shared by every numerical routine in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("argument outside the domain: {0}")]
    Domain(String),
    #[error("adaptive quadrature did not converge: {0}")]
    NonConvergence(String),
    #[error("could not bracket the root: {0}")]
    BracketFailure(String),
    #[error("no sign change found: {0}")]
    NoSignChange(String),
    #[error("turning point not reached: {0}")]
    EventNotFound(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
