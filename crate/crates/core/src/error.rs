use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A stated hypothesis of a bound does not hold for the given inputs.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// The requested level cannot be reached by any probability measure.
    #[error("infeasible level {level}: attainable range is [{lo}, {hi}]")]
    InfeasibleLevel { level: f64, lo: f64, hi: f64 },
    /// The CRT coupling needs the window primorial to fit below `n`.
    #[error("infeasible coupling: product of window primes {product} exceeds n = {n}")]
    InfeasibleCoupling { product: u128, n: u64 },
    /// A state space or integer accumulator would exceed the configured size.
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    /// The combination of parameters has no supported formula.
    #[error("unsupported combination: {0}")]
    Unsupported(String),
    #[error("report error: {0}")]
    Report(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by the mathematical inputs rather than by I/O.
    pub fn is_math(&self) -> bool {
        !matches!(self, Error::Report(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
