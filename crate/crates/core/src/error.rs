use crate::expr::{EvalError, ParseError};

/// Everything the library can fail with.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid model: {0}")]
    Model(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("rank {first} at probe {first_probe} but rank {other} at probe {other_probe}")]
    RankVaries { first: usize, first_probe: usize, other: usize, other_probe: usize },
    #[error("rank deficiency: {0}")]
    RankDeficient(String),
    #[error("inconsistent degenerate sector at t = {t}: residual {residual:.3e}")]
    Inconsistent { t: f64, residual: f64 },
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl Error {
    /// True for failures caused by bad input rather than by numerics.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Parse(_) | Error::Model(_) | Error::Usage(_) | Error::Io { .. })
            || matches!(self, Error::Eval(EvalError::Unbound(_) | EvalError::Rebound(_)))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
