use thiserror::Error;

/// Errors raised by the library. All of them signal a violated precondition
/// or malformed input; none are transient.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("fixed-point count {m} exceeds permutation size {n}")]
    FixedPointsExceedSize { n: u64, m: u64 },

    #[error("permutation size must be at least {min}, got {n}")]
    SizeTooSmall { n: usize, min: usize },

    #[error("size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("not a permutation of 1..={n}: {reason}")]
    NotAPermutation { n: usize, reason: String },

    #[error("position {pos} out of range 1..={n}")]
    PositionOutOfRange { pos: usize, n: usize },

    #[error("positions must be distinct, got {0} twice")]
    SamePosition(usize),

    #[error("exhaustive census limited to n <= {max}, got {n}")]
    CensusTooLarge { n: usize, max: usize },

    #[error("edge probability must lie strictly inside (0, 1), got {0}")]
    EdgeProbability(f64),

    #[error("invalid annealing configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid experiment parameters: {0}")]
    InvalidExperiment(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
