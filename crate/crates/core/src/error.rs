use thiserror::Error;

/// Error type shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An index (site, link, coordinate, ...) fell outside its valid range.
    #[error("index out of range: {0}")]
    Index(String),

    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Structural validation of a model component failed.
    #[error("validation failed: {0}")]
    Validation(String),

    /// A numerical procedure did not converge or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Fixed-step integration broke down; the time stamp points at the step.
    #[error("integration failed at t = {time}: {message}")]
    Integration { time: f64, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
