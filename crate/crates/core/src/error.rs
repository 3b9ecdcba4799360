use thiserror::Error;

/// Errors produced by the library.
///
/// The variants are grouped by how a caller is expected to react: bad input
/// (`Validation`, `DimensionMismatch`, `Precondition`), mathematically
/// degenerate input (`Infeasible`, `Degenerate`, `Singular`), resource limits
/// (`Budget`) and failed checks (`CheckFailed`).
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {message}")]
    Validation { path: String, message: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("infeasible input: {0}")]
    Infeasible(String),

    #[error("degenerate support: {0}")]
    Degenerate(String),

    #[error("{0}")]
    Singular(String),

    #[error("enumeration budget exceeded: {states} states requested, budget is {budget}")]
    Budget { states: u128, budget: u64 },

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("linear program failed: {0}")]
    Lp(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }
}
