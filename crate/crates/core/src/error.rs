use thiserror::Error;

/// Errors raised by grid operations and analyses.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two objects that must agree in dimension or length do not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// A non-finite value reached a place that requires finite data.
    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    /// 1-D subdifferential is empty: `u` is not convex around `x`.
    #[error("non-convex data: chord slopes {left} > {right} around node {node}")]
    NonConvex { node: usize, left: f64, right: f64 },

    /// A subgradient pair failed its membership precondition.
    #[error("pair {index} fails subdifferential membership")]
    InvalidPair { index: usize },

    /// Two computations of the same object disagree beyond tolerance.
    #[error("internal consistency failure: {0}")]
    Consistency(String),

    /// Malformed serialized input.
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
