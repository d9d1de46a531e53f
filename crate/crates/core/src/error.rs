use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{0} queue is unstable (arrival rate exceeds service rate)")]
    Unstable(&'static str),

    #[error("{0} queue is saturated; mean delay is unbounded")]
    Saturated(&'static str),

    #[error("primary delay cap {cap} is below the irreducible primary queue delay {floor}")]
    InfeasibleCap { cap: f64, floor: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("no root below the upper bracket {upper}")]
    BracketExhausted { upper: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
