use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("dimension {dim} exceeds the memory budget of {budget_mb} MB")]
    BudgetExceeded { dim: usize, budget_mb: usize },
    #[error("basis mismatch: expected {expected}, got {got}")]
    BasisMismatch { expected: usize, got: usize },
    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("zero denominator: {0}")]
    ZeroDenominator(&'static str),
    #[error("solver did not converge: {0}")]
    NoConvergence(String),
    #[error("time step underflow at t = {0}")]
    StepUnderflow(f64),
    #[error("fit window too short: {got} samples, need at least {need}")]
    ShortWindow { got: usize, need: usize },
    #[error("coupling estimate violated at x = {x}, mode {mode}: {what}")]
    EstimateViolation { x: f64, mode: usize, what: String },
    #[error("filter support reaches {top} which is not below threshold {threshold} - margin {margin}")]
    SupportAboveThreshold { top: f64, threshold: f64, margin: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
