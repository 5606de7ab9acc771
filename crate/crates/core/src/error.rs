use thiserror::Error;

/// Errors surfaced by model construction, evaluation and fitting.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure failed to reach its requested accuracy.
    /// `achieved` is the best tolerance the procedure could certify.
    #[error("numeric error: {message} (achieved tolerance {achieved:.3e})")]
    Numeric { message: String, achieved: f64 },

    /// A time point is not representable on the model's discretization grid.
    #[error("grid error: {0}")]
    Grid(String),

    /// A dataset failed validation.
    #[error("data error: {0}")]
    Data(String),

    /// An optimization run ended without meeting its convergence criteria.
    #[error("nonconvergence: {0}")]
    NonConvergence(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numeric(msg: impl Into<String>, achieved: f64) -> Self {
        Error::Numeric {
            message: msg.into(),
            achieved,
        }
    }

    pub fn grid(msg: impl Into<String>) -> Self {
        Error::Grid(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
