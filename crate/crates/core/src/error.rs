use thiserror::Error;

/// Errors raised across the numerical modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument violates an operation's precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A composite input (sequence, measure, query) failed validation.
    #[error("validation error: {0}")]
    Validation(String),

    /// Pattern or config text could not be parsed.
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("matrix dimensions do not match: expected {expected}, found {found}")]
    Dimension { expected: String, found: String },

    /// A factor was singular to machine precision.
    #[error("factor {tau} is singular to machine precision")]
    SingularFactor { tau: usize },

    #[error("pole: {0}")]
    Pole(String),

    /// No admissible contour family exists for the requested exponents.
    #[error("contour infeasible: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
