use thiserror::Error;

/// Errors raised by the numeric layers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// The input lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A certified decision could not be made at the available precision.
    #[error("precision exhausted at {precision} bits: {detail}")]
    Precision { precision: u32, detail: String },

    /// A sieve or table would exceed the configured memory budget.
    #[error("resource budget exceeded: {0}")]
    Resource(String),

    /// Two critical epsilons overlap even at maximum precision.
    #[error(
        "critical epsilons F({},{}) and F({},{}) not separated at {precision} bits",
        first.0, first.1, second.0, second.1
    )]
    TieDetected {
        first: (u64, u32),
        second: (u64, u32),
        precision: u32,
    },

    /// Malformed caller input.
    #[error("invalid input: {0}")]
    Input(String),
}

impl Error {
    pub fn is_precision(&self) -> bool {
        matches!(self, Error::Precision { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
