use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("graph construction failed: {0}")]
    Construction(String),

    #[error("mixing matrix violates {condition}: {detail}")]
    MixingValidation {
        condition: &'static str,
        detail: String,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("iteration diverged at round {round}: {what}")]
    Divergence { round: usize, what: String },

    #[error("stepsize too large: {0}")]
    StepsizeTooLarge(String),

    #[error("reference solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    OracleNonConvergence { residual: f64, iterations: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("dataset i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("dataset format: {0}")]
    Format(String),
}
