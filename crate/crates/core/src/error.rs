use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("undamped collective mode: both intrinsic damping rates vanish")]
    UndampedCollectiveMode,
    #[error("unstable integration at t = {t:e} s")]
    UnstableIntegration { t: f64 },
    #[error("no steady state (unstable configuration), max Re eigenvalue {max_re:e} rad/s")]
    NoSteadyState { max_re: f64 },
    #[error("internal consistency error: {0}")]
    Internal(String),
    #[error("insufficient history for t = {t:e} s")]
    InsufficientHistory { t: f64 },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error(
        "best-fit parameters are unstable (min damping {min_gamma:e} rad/s); \
         fit a stable configuration and reuse its parameters"
    )]
    UnstableFit { min_gamma: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
