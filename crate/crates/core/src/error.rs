use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("particle number must be at least {min}, got {got}")]
    TooFewParticles { min: usize, got: usize },

    #[error("amplitude vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("mean spin length {0:e} is below the degenerate-signal threshold")]
    DegenerateSignal(f64),

    #[error("negative or non-finite duration {0}")]
    InvalidDuration(f64),

    #[error("non-finite angle {0}")]
    InvalidAngle(f64),

    #[error("protocol has no segments")]
    EmptyProtocol,

    #[error("first segment must have theta = 0, got {0}")]
    FirstAngleNonZero(f64),

    #[error("sample time {time} outside [0, {total}]")]
    SampleTimeOutOfRange { time: f64, total: f64 },

    #[error("parameter vector has length {got}, expected {expected}")]
    ParamLength { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("particle numbers must be distinct and positive")]
    DegenerateAbscissa,

    #[error("eigensolver failed to converge after {0} iterations")]
    NoConvergence(usize),

    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;
