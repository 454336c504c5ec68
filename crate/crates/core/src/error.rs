use thiserror::Error;

use crate::region::TradeoffPoint;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative solver stopped without meeting its tolerance.
    #[error("{solver} did not converge after {iterations} iterations (last iterate {last}, residual {residual:e})")]
    Convergence {
        solver: &'static str,
        iterations: usize,
        last: f64,
        residual: f64,
    },

    /// A root-finding bracket could not be established.
    #[error("no bracket for {0}")]
    Bracket(String),

    /// The requested tradeoff point is outside the feasible region.
    #[error("target ({}, {}) is outside the feasible region: {reason}", target.tpp, target.fdp)]
    Infeasible {
        target: TradeoffPoint,
        reason: String,
    },

    /// The achievability search ran out of budget.
    #[error("no parameters reproduce ({}, {}); closest achieved ({}, {})", target.tpp, target.fdp, closest.tpp, closest.fdp)]
    NotFound {
        target: TradeoffPoint,
        closest: TradeoffPoint,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("too many failed trials: {failed} of {total}")]
    TrialFailures { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
