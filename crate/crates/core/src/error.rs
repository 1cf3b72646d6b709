use thiserror::Error;

/// Failures shared by every solver and oracle in the crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("bundle out of bounds at item {item}: quantity {quantity} exceeds supply {supply}")]
    BundleOutOfBounds { item: usize, quantity: u32, supply: u32 },

    #[error("malformed instance: {0}")]
    MalformedInstance(String),

    #[error("{what} needs {needed} enumeration steps, budget is {budget}")]
    BudgetExceeded { what: &'static str, needed: u128, budget: u128 },

    #[error("gross-substitutes check exceeds the limit: n = {n} > {limit}")]
    ExceedsCheckLimit { n: usize, limit: usize },

    #[error("operation requires unit supply of every item")]
    NotUnitSupply,

    #[error("buyer {buyer} is not monotone: v({smaller:#b}) = {small_value} > v({larger:#b}) = {large_value}")]
    NotMonotone { buyer: usize, smaller: u64, larger: u64, small_value: i64, large_value: i64 },

    #[error("allocation is not welfare-optimal: the exchange graph has a negative cycle")]
    NegativeCycle,

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("numeric failure in floating-point iteration")]
    NumericFailure,

    #[error("rounding is ambiguous at coordinate {coordinate}")]
    AmbiguousRounding { coordinate: usize },

    #[error("certificate violated after phase {phase}: buyer {buyer} fails the {condition} condition")]
    CertificateViolation { phase: usize, buyer: usize, condition: &'static str },
}

pub type Result<T> = std::result::Result<T, Error>;
