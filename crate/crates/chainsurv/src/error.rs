//! Error type shared across the crate, with the process exit codes the CLI
//! maps each class onto.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An operation was called with inputs that violate its contract
    /// (shape mismatch, missing gradient, non-scalar loss, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A forward/backward computation produced NaN or Inf.
    #[error("numeric fault in `{op}`: {detail}")]
    Numeric { op: String, detail: String },

    /// Cohort files, manifests, or configs failed to load or validate.
    #[error("validation error: {0}")]
    Validation(String),

    /// The gradient check exceeded its acceptance threshold.
    #[error("gradient check failed: max relative error {max_rel_err:.3e} >= {threshold:.3e}")]
    GradCheckBreach { max_rel_err: f64, threshold: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn numeric(op: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Numeric {
            op: op.into(),
            detail: detail.into(),
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Process exit code for the CLI: 2 validation, 3 numeric fault,
    /// 4 gradient-check breach.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Contract(_) | Error::Validation(_) | Error::Io(_) | Error::Json(_) => 2,
            Error::Numeric { .. } => 3,
            Error::GradCheckBreach { .. } => 4,
        }
    }
}
