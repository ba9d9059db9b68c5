use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty coefficient or direction vector")]
    EmptyInput,
    #[error("profile is not superlinear: degree {degree} with leading coefficient {leading}")]
    NonSuperlinear { degree: usize, leading: f64 },
    #[error("last entry of the direction vector is zero")]
    ZeroLastDirection,
    #[error("last entry of the direction vector must be positive, got {0}")]
    NegativeLastDirection(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("parameter {name} must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("relative tolerance {0} outside the supported range")]
    BadTolerance(f64),
    #[error("weight integral diverges: frequency lies outside the admissible cone")]
    Divergent,
    #[error("requested tolerance {requested:e} not met (estimate {achieved:e})")]
    ToleranceNotMet { requested: f64, achieved: f64 },
    #[error("kernel is singular on the diagonal")]
    OnDiagonal,
    #[error("points too close: frequency truncation could not be certified")]
    NearDiagonal,
    #[error("unsupported profile: {0}")]
    UnsupportedProfile(&'static str),
    #[error("grid box too small: {guarded} of {total} energy-carrying slices truncated")]
    BoxTooSmall { guarded: usize, total: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("no admissible path found at resolution {0}")]
    NoPathFound(usize),
}

impl Error {
    /// Errors that signal a mathematically meaningful refusal rather than bad input.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::Divergent
                | Error::OnDiagonal
                | Error::NearDiagonal
                | Error::BoxTooSmall { .. }
                | Error::ToleranceNotMet { .. }
                | Error::NoPathFound(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
