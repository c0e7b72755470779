use thiserror::Error;

use crate::sim::Trace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    /// A quantity required to be nonzero/positive left its domain at run time.
    #[error("domain violation at t = {t}: {what}")]
    Domain { what: String, t: f64 },

    #[error("non-finite value in {quantity} at t = {t}")]
    NonFinite { quantity: String, t: f64 },

    #[error("non-finite derivative in RK4 stage {stage} at t = {t}")]
    NonFiniteStage { stage: usize, t: f64 },

    /// The run left the admissible state box; `trace` holds every sample
    /// logged before the abort.
    #[error("divergence at t = {t}: |{quantity}| exceeded {limit:e}")]
    Diverged {
        t: f64,
        quantity: String,
        limit: f64,
        trace: Box<Trace>,
    },

    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
