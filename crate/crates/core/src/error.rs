use thiserror::Error;

/// Errors surfaced by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {message}")]
    Parameter { field: &'static str, message: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("power iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("population collapse at stage {stage} (t = {time}): no survivors, increase the population")]
    PopulationCollapse { stage: usize, time: f64 },

    #[error("statistical resolution exhausted: {0}")]
    Resolution(String),

    #[error("negative transformed rate {rate:e} from state {from} to {to}")]
    NegativeRate { from: u64, to: u64, rate: f64 },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(field: &'static str, message: impl Into<String>) -> Self {
        Error::Parameter {
            field,
            message: message.into(),
        }
    }

    /// True for errors caused by insufficient Monte Carlo resolution rather than bad input.
    pub fn is_statistical(&self) -> bool {
        matches!(self, Error::PopulationCollapse { .. } | Error::Resolution(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
