use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid parameters: {0}")]
    Parameter(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("missing capability: {0}")]
    Capability(String),

    #[error("implicit solve did not converge: residual {residual:e} after {iters} iterations")]
    SolverFailed { residual: f64, iters: usize },

    #[error("integration blew up; last finite time t = {t}")]
    BlowUp { t: f64 },

    #[error("experiment failed: {0}")]
    Experiment(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn non_finite(context: impl Into<String>) -> Self {
        Error::NonFinite {
            context: context.into(),
        }
    }
}
