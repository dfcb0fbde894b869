use thiserror::Error;

/// Errors raised by permlab operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    Asymmetric { asymmetry: f64 },

    #[error("entry ({row}, {col}) = {value} violates the domain: {reason}")]
    Domain {
        row: usize,
        col: usize,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("Sinkhorn did not converge in {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("matrix is not doubly stochastic (residual {residual:e} > {tolerance:e})")]
    NotDoublyStochastic { residual: f64, tolerance: f64 },

    #[error("dimension {dim} exceeds the {method} guard of {max}")]
    SizeGuard {
        method: &'static str,
        dim: usize,
        max: usize,
    },

    #[error("about {estimate:.3e} contingency tables exceed the budget of {budget:.3e}")]
    Budget { estimate: f64, budget: f64 },

    #[error("degenerate spectrum: fluctuation determinant {det:e} is not positive")]
    Degenerate { det: f64 },

    #[error("permanent lost to cancellation (computed {value:e})")]
    Cancellation { value: f64 },

    #[error("index ({rho}, {sigma}) out of range for m = {m}")]
    IndexOutOfRange { rho: usize, sigma: usize, m: usize },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
