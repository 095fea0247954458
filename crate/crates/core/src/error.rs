use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument fell outside the domain of the function.
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("{0}")]
    InvalidConfig(String),

    /// Adaptive quadrature ran out of subdivisions. `value` is the best
    /// estimate reached.
    #[error("quadrature did not converge after {subdivisions} panels (value {value:e}, error estimate {error:e})")]
    Convergence {
        value: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("integrand returned a non-finite value at x = {at}")]
    NonFinite { at: f64 },

    #[error("simulation: {0}")]
    Simulation(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
