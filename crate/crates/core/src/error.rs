use thiserror::Error;

/// Errors raised by the solver modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// `user_power` was called with a non-positive power multiplier.
    #[error("unbounded power: lambda must be positive (got {0})")]
    UnboundedPower(f64),
    #[error("SDMA set {set} is rank deficient on subcarrier {carrier}")]
    RejectedSet { carrier: usize, set: usize },
    #[error("enumeration needs {needed} assignments, budget is {budget}")]
    BudgetExceeded { needed: f64, budget: u64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
