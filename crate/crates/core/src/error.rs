use std::path::PathBuf;

use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unsupported system: {0}")]
    Unsupported(String),

    #[error("system realization is not minimal (controllability rank {ctrb}, observability rank {obsv}, order {n})")]
    NotMinimal { ctrb: usize, obsv: usize, n: usize },

    #[error("H-infinity norm undefined: pole {0} lies on the unit circle")]
    PoleOnUnitCircle(Complex64),

    #[error("system has {} transmission zero(s) on the unit circle; use the unit-circle tracking path", .0.len())]
    UnitCircleZeros(Vec<Complex64>),

    #[error("every transmission zero is non-minimum phase and no padding eigenvalues exist; the observer has no stable rows")]
    AllNonMinimumPhase,

    #[error("observer rank {achieved} is below the required {required}; repeated minimum-phase zeros need the repeated-zero prefilter")]
    DegenerateZeros { achieved: usize, required: usize },

    #[error("rank loss: {0}")]
    RankLoss(String),

    #[error("neither B1 nor D has full column rank; non-minimum-phase states and inputs cannot be reconstructed")]
    NotReconstructible,

    #[error("zero dynamics matrix is singular; an undetected zero at the origin is mixed into the non-minimum-phase modes")]
    SingularZeroDynamics,

    #[error("insufficient data: need at least {needed} samples, got {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("trace alignment error: {0}")]
    Alignment(String),

    #[error("preview exhausted: need {needed} samples of the desired trajectory, got {available}")]
    PreviewExhausted { needed: usize, available: usize },

    #[error("invalid controller: {0}")]
    InvalidController(String),

    #[error("improper filter chain: {0}")]
    Improper(String),

    #[error("factor (z - {0}) is not minimum phase")]
    NotMinimumPhaseFactor(f64),

    #[error("config error on line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable numeric code, shared with the C ABI.
    pub fn code(&self) -> i32 {
        match self {
            Error::Dimension(_) => 2,
            Error::Unsupported(_) => 3,
            Error::NotMinimal { .. } => 4,
            Error::PoleOnUnitCircle(_) => 5,
            Error::UnitCircleZeros(_) => 6,
            Error::AllNonMinimumPhase => 7,
            Error::DegenerateZeros { .. } => 8,
            Error::RankLoss(_) => 9,
            Error::NotReconstructible => 10,
            Error::SingularZeroDynamics => 11,
            Error::InsufficientData { .. } => 12,
            Error::Alignment(_) => 13,
            Error::PreviewExhausted { .. } => 14,
            Error::InvalidController(_) => 15,
            Error::Improper(_) => 16,
            Error::NotMinimumPhaseFactor(_) => 17,
            Error::Config { .. } => 18,
            Error::Io { .. } => 19,
        }
    }
}
