use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure classes. The CLI maps these onto exit codes
/// (validation → 2, numerical → 3, invariant → 4).
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("segment {index}: matrix is not nonnegative (h11={h11}, h22={h22}, det={det})")]
    NotPsd { index: usize, h11: f64, h22: f64, det: f64 },

    #[error("segments do not tile [0, ell]: {0}")]
    Tiling(String),

    #[error("r = {r} lies outside [0, {ell}]")]
    OutOfRange { r: f64, ell: f64 },

    #[error("scan step {step} too coarse (must be <= {limit})")]
    StepTooCoarse { step: f64, limit: f64 },

    #[error("measure not comparable on PW_s at this truncation (s = {s}, N = {n}): {detail}")]
    NotComparable { s: f64, n: usize, detail: String },

    #[error("numerical failure in {stage}: {detail}")]
    Numerical { stage: &'static str, detail: String },

    #[error("invariant breach: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn numerical(stage: &'static str, detail: impl Into<String>) -> Self {
        Error::Numerical { stage, detail: detail.into() }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_)
            | Error::Io(_)
            | Error::Invalid(_)
            | Error::NotPsd { .. }
            | Error::Tiling(_)
            | Error::OutOfRange { .. }
            | Error::StepTooCoarse { .. } => 2,
            Error::NotComparable { .. } | Error::Numerical { .. } => 3,
            Error::Invariant(_) => 4,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
