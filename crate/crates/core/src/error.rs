use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user input: parameters, specs, sizes.
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("volatility {value} at log-price {z} outside declared bounds [{min}, {max}]")]
    BoundViolation { z: f64, value: f64, min: f64, max: f64 },

    #[error("degenerate volatility {value} at log-price {z}")]
    Degenerate { z: f64, value: f64 },

    #[error("probabilities at log-price {z} do not sum to one (deviation {deviation:e})")]
    ProbabilityDefect { z: f64, deviation: f64 },

    #[error("seller payoff {g} below buyer payoff {f} at step {k}, node {i}")]
    ObstacleOrder { k: usize, i: i64, f: f64, g: f64 },

    #[error("{truncated} of {m} embedding paths did not complete within the horizon cap")]
    Truncation { truncated: usize, m: usize },

    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad input rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_))
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}
