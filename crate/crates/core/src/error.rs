use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("quadrature budget exhausted: best estimate {estimate:e}, error estimate {error:e}")]
    Accuracy { estimate: f64, error: f64 },

    #[error("no sign change on bracket [{lo}, {hi}]")]
    Bracketing { lo: f64, hi: f64 },

    #[error(
        "pmf table of {requested} entries exceeds the budget of {budget}; \
         use the generating-function estimator instead"
    )]
    Budget { requested: u64, budget: usize },

    #[error("log-ratio {y} outside the range ({min}, {max}) of the ratio function")]
    OutOfRange { y: f64, min: f64, max: f64 },

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("estimator undefined: {0}")]
    Undefined(String),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("covariance matrix is not positive semidefinite: {0}")]
    NotPsd(String),

    #[error(
        "division budget of {budget} exceeded at t = {time:.4} \
         ({divisions} divisions, {mutants} mutants so far)"
    )]
    CellBudget {
        budget: u64,
        divisions: u64,
        mutants: u64,
        time: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(what: &'static str, value: f64) -> Error {
    Error::Domain { what, value }
}
