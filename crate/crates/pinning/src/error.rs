/// Errors reported by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on the inputs is violated.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An iterative method failed to reach its tolerance.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// Two routes to the same quantity disagree beyond what rounding allows;
    /// indicates a bug or an invalid correlation profile.
    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
