use thiserror::Error;

/// Errors surfaced by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Input data violates a structural invariant (monotonicity, ordering, shape).
    #[error("validation error: {0}")]
    Validation(String),
    /// A quadrature or iterative method failed to reach its tolerance.
    #[error("numerical error: {0}")]
    Numerical(String),
    /// The operation's precondition does not hold for this input.
    #[error("precondition error: {0}")]
    Precondition(String),
    /// The request cannot be met (for example `lambda >= ||E||`).
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// The request needs more range than double precision can represent.
    #[error("resource error: {0}")]
    Resource(String),
    /// A self-consistency check failed; indicates a bug.
    #[error("internal consistency error: {0}")]
    Internal(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Validation(_)
                | Error::Precondition(_)
                | Error::Json(_)
                | Error::Csv(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
