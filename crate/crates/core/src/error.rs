use thiserror::Error;

use crate::dynamics::MomentState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("mean-field iteration is multistable or nonconvergent after {iterations} iterations (residual {residual:e})")]
    MeanFieldNonconvergent { iterations: usize, residual: f64 },

    #[error("integration failed at t = {t}: {reason}")]
    Integration {
        t: f64,
        reason: String,
        last_good: Option<Box<MomentState>>,
    },

    #[error("physicality violated at t = {t}: {what}")]
    Physicality { t: f64, what: String },

    #[error("dynamics unstable: {0}")]
    Unstable(String),

    #[error("steady state not converged by t = {t_max} (last window average {last_average})")]
    NotConverged { t_max: f64, last_average: f64 },

    #[error("Fock truncation failure: {0}")]
    Truncation(String),
}

impl Error {
    /// Shorthand for [`Error::InvalidParameter`].
    pub fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
