use thiserror::Error;

/// Failures raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid order {0} is below the minimum of 4")]
    GridTooSmall(usize),
    #[error("resolving the layers needs N = {required}, above the cap of {cap}")]
    GridTooLarge { required: usize, cap: usize },
    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("outside the validated domain: {0}")]
    Domain(String),
    #[error("linear solve failed ({0})")]
    SolveFailed(String),
    #[error("degenerate homogeneous pair: |A1 A2 - B1 B2| = {det:e} against |B1 B2| = {scale:e}")]
    Degenerate { det: f64, scale: f64 },
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("eigen/singular value solver failed: {0}")]
    Decomposition(String),
    #[error("fit rejected: {0}")]
    FitRejected(String),
    #[error("blow-up guard tripped at t = {time}: |w| = {magnitude:e}")]
    BlowUp { time: f64, magnitude: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
