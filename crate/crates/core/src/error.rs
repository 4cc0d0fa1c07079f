use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("bit count must be even, got {0}")]
    OddBitCount(usize),

    #[error("bit values must be 0 or 1, found {0}")]
    InvalidBit(u8),

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite sample value")]
    NonFinite,

    #[error("pilot period mismatch: K*T = {sampled} s but period is {period} s")]
    PeriodMismatch { sampled: f64, period: f64 },

    #[error("delay {delay} s outside [0, {period}) s")]
    DelayOutOfRange { delay: f64, period: f64 },

    #[error("sequence too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("sampling too coarse for unfolding: T*Omega*e = {0} >= 1")]
    Undersampled(f64),

    #[error("unfolding failed at difference order {stage}: lattice residual {residual}")]
    RecoveryFailure { stage: usize, residual: f64 },

    #[error("unfolded peak {peak} exceeds the amplitude bound {bound}")]
    BoundExceeded { peak: f64, bound: f64 },

    #[error("rank-deficient Hankel system at model order {0}")]
    RankDeficient(usize),

    #[error("channel estimation failed: {0}")]
    EstimationFailure(String),

    #[error("reference has zero energy")]
    ZeroEnergy,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
