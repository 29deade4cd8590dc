use lqg_conic::ConicError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite data: {0}")]
    NonFinite(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("system is not stable (spectral radius {0})")]
    Unstable(f64),
    #[error("state diverged at step {0}")]
    Divergence(usize),
    #[error("insufficient data: horizon {horizon} < window {window}")]
    InsufficientData { horizon: usize, window: usize },
    #[error("unidentifiable: regressor singular values {singular_values:?}")]
    Unidentifiable { singular_values: Vec<f64> },
    #[error("ill-posed feedthrough: plant model has nonzero G_0")]
    IllPosedFeedthrough,
    #[error("H-infinity SDP did not converge: certified {upper}, lower bound {lower}, residuals {residuals:?}")]
    HinfSdp { lower: f64, upper: f64, residuals: [f64; 3] },
    #[error("Riccati iteration did not converge (last residual {0:e})")]
    Dare(f64),
    #[error("closed loop unstable (spectral radius {0})")]
    ClosedLoopUnstable(f64),
    #[error("fixed point did not converge: {0}")]
    FixedPoint(String),
    #[error("eigenvalue computation failed")]
    Eigen,
    #[error("cone solver: {0}")]
    Solver(#[from] ConicError),
}

impl Error {
    /// Errors caused by bad user input rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Dimension(_) | Error::Validation(_) | Error::Precondition(_) | Error::NonFinite(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
