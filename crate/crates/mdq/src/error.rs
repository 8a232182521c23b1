use thiserror::Error;

#[derive(Debug, Error)]
pub enum MdqError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite input at coordinate {coord} (time {t}): {value}")]
    NonFinite { t: u64, coord: usize, value: f64 },

    #[error("matrix is not symmetric: |K[{i}][{j}] - K[{j}][{i}]| = {gap:e}")]
    Asymmetric { i: usize, j: usize, gap: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below -{tolerance:e}")]
    Indefinite { eigenvalue: f64, tolerance: f64 },

    #[error("distortion triple outside the non-degenerate band: {0}")]
    OutOfBand(String),

    #[error("rate target {target} outside the dominant-face interval [{lo}, {hi}]")]
    RateOutOfRange { target: f64, lo: f64, hi: f64 },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("index overflow in stage {stage} at time {t}: {value} exceeds 2^31")]
    IndexOverflow { stage: usize, t: u64, value: f64 },

    #[error("channel failure: description {0} unavailable")]
    ChannelFailure(u8),

    #[error("estimator needs at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("stream format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, MdqError>;
