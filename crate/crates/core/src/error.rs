use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T> = std::result::Result<T, RuinError>;

#[derive(Debug, Error)]
pub enum RuinError {
    /// Model parameters violate one or more invariants.
    #[error("invalid model parameters: {0}")]
    InvalidParams(ValidationReport),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The requested computation is not defined in this parameter regime.
    #[error("INVALID_REGIME: {0}")]
    InvalidRegime(String),

    #[error("NONCONVERGED: {0}")]
    NonConverged(String),

    #[error("STIFFNESS: {0}")]
    Stiffness(String),

    #[error("INSUFFICIENT_RANGE: {0}")]
    InsufficientRange(String),

    #[error("NON_MONOTONE_GRID: grid must be strictly increasing (violated at index {0})")]
    NonMonotoneGrid(usize),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RuinError {
    /// Machine-readable code of the failure.
    pub fn code(&self) -> &'static str {
        match self {
            RuinError::InvalidParams(_) => "INVALID_PARAMS",
            RuinError::InvalidArgument(_) => "INVALID_ARGUMENT",
            RuinError::InvalidRegime(_) => "INVALID_REGIME",
            RuinError::NonConverged(_) => "NONCONVERGED",
            RuinError::Stiffness(_) => "STIFFNESS",
            RuinError::InsufficientRange(_) => "INSUFFICIENT_RANGE",
            RuinError::NonMonotoneGrid(_) => "NON_MONOTONE_GRID",
            RuinError::Json(_) => "JSON",
            RuinError::Csv(_) => "CSV",
            RuinError::Io(_) => "IO",
        }
    }

    /// True when the failure is caused by the caller's input rather than by
    /// the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            RuinError::InvalidParams(_)
                | RuinError::InvalidArgument(_)
                | RuinError::InvalidRegime(_)
                | RuinError::InsufficientRange(_)
                | RuinError::NonMonotoneGrid(_)
                | RuinError::Json(_)
        )
    }
}
