use alloc::string::String;

/// Errors raised by the calculus engine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("parameter `{name}` out of domain: {reason}")]
    Domain { name: &'static str, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("function `{0}` has no derivative")]
    NotDifferentiable(String),

    #[error("derivative requested at breakpoint {at} without a one-sided convention")]
    Breakpoint { at: f64 },

    #[error("martingale builder `{0}` has jump increments; use the compensator representation")]
    DiscontinuousBuilder(String),

    #[error("quadrature did not converge (estimate {estimate}, error {error})")]
    Quadrature { estimate: f64, error: f64 },

    #[error("integrand is unbounded on the region")]
    Unbounded,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },

    #[error("expected dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("truncation sequence: {0}")]
    Truncation(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain { name, reason: reason.into() }
    }
}
