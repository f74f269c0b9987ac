use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    #[error("{field}: {reason}")]
    Domain { field: &'static str, reason: String },

    /// A closed form could not be evaluated in double precision.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("power iteration did not converge after {iterations} sweeps (last delta {delta:e})")]
    Convergence { iterations: usize, delta: f64 },

    #[error("stationary mass beyond the level cap is {tail_mass:e}, above the {limit:e} limit; raise the cap")]
    Truncation { tail_mass: f64, limit: f64 },

    #[error("required level cap {required} exceeds the {limit} limit")]
    Cap { required: f64, limit: usize },
}

impl Error {
    pub(crate) fn domain(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            field,
            reason: reason.into(),
        }
    }

    /// Numerical-path failures (as opposed to bad inputs).
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::Domain { .. })
    }
}
