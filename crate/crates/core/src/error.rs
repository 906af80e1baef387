use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: deviation {deviation:e} exceeds {allowed:e}")]
    NotHermitian { deviation: f64, allowed: f64 },

    #[error("matrix contains NaN or infinite entries")]
    NonFinite,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("metric is not positive semi-definite (eigenvalue {0:e})")]
    MetricNotPsd(f64),

    #[error("metric has numerical rank 0")]
    DegenerateMetric,

    #[error("state vanishes")]
    ZeroState,

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    BadParameter { name: &'static str, reason: String },

    #[error("operator dimension {0} is too small, need at least 2")]
    TooSmall(usize),

    #[error("expectation value is not real (imaginary part {0:e})")]
    NotReal(f64),

    #[error("state has Schmidt rank {rank}, more than r = {r}")]
    RankTooHigh { rank: usize, r: usize },

    #[error("gamma matrix is indefinite (eigenvalue {0:e}); principal-submatrix values only bound f_r from below")]
    IndefiniteGamma(f64),

    #[error("iteration did not converge")]
    NoConvergence,
}

impl Error {
    pub(crate) fn bad(name: &'static str, reason: impl Into<String>) -> Self {
        Error::BadParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
