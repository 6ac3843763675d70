use thiserror::Error;

use crate::dynamics::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("integer overflow in {0}")]
    Overflow(&'static str),

    #[error("gradient of h vanishes at {at:?}")]
    DegenerateGradient { at: Vec<f64> },

    #[error("not quasi-convex: projected Hessian eigenvalue {eigenvalue} at {at:?}")]
    NotQuasiConvex { at: Vec<f64>, eigenvalue: f64 },

    #[error("enumeration of {required} vectors exceeds budget {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure {
        t: f64,
        reason: String,
        partial: Box<Trajectory>,
    },

    #[error("not fittable: {0}")]
    NotFittable(String),

    #[error("postcondition violated: {0}")]
    Internal(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
