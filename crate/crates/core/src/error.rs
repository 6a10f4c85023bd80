use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("outside the domain of definition: {0}")]
    Domain(String),

    #[error("singular point: {0}")]
    Singularity(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(
        "linear solver did not converge after {iterations} iterations (residual {residual:e})"
    )]
    Solver { iterations: usize, residual: f64 },

    #[error("simulation diverged: {0}")]
    Divergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
