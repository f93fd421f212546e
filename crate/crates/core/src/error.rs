use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid input: bad sizes, unknown sites, violated preconditions.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// A closed-form expression was evaluated outside its validity window.
    #[error("outside domain: {0}")]
    Domain(String),
    /// A physical requirement of the operation is not met (wrong phase, ambiguous branch, lost packet).
    #[error("physics: {0}")]
    Physics(String),
    /// A numerical invariant broke (non-antisymmetric generator, failed convergence).
    #[error("numerical: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
