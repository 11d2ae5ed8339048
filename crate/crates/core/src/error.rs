use thiserror::Error;

use crate::fit::FitResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("infeasible plan: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("rank-deficient problem: {0}")]
    RankDeficient(String),

    /// Carries the best parameters seen before the iteration budget ran out.
    #[error("fit did not converge after {iterations} iterations (residual rms {:.3e})", best.residual_rms)]
    NotConverged {
        iterations: usize,
        best: Box<FitResult>,
    },

    #[error("fit failed for n = {n}: {source}")]
    FitAtN { n: usize, source: Box<Error> },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical(_) | Error::RankDeficient(_) | Error::NotConverged { .. } => true,
            Error::FitAtN { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
