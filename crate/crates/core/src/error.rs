use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input (dimension mismatch, invalid model, ...).
    #[error("rejected input: {0}")]
    RejectedInput(String),

    #[error("empty measure: every log-weight is -inf")]
    EmptyMeasure,

    /// `q` vanishes where `p` carries mass.
    #[error("support violation: q vanishes on {nodes} nodes where p > 0")]
    SupportViolation { nodes: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("fixed point did not converge after {iterations} iterations (last residual {last:e})")]
    NonConvergence {
        iterations: usize,
        last: f64,
        trace: Vec<f64>,
    },

    #[error("divergence guard tripped at step {step}: particle {particle} reached {value:e}")]
    DivergenceGuard {
        step: usize,
        particle: usize,
        value: f64,
    },

    #[error("integration failure: {0}")]
    Integration(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn reject<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::RejectedInput(msg.into()))
}
