use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("parameter mismatch: {0}")]
    ParamMismatch(String),
    #[error("polynomial is in the wrong domain for this operation")]
    DomainMismatch,
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("scale mismatch: {left} vs {right}")]
    ScaleMismatch { left: i64, right: i64 },
    #[error("lane mismatch: {left} vs {right}")]
    LaneMismatch { left: usize, right: usize },
    #[error("zero plaintext multiplier; elide the operation instead")]
    ZeroPlaintext,
    #[error("noise budget exhausted ({0:.2} bits)")]
    NoiseExhausted(f64),
    #[error("multiplicative depth {depth} exceeds budget {budget}")]
    DepthExceeded { depth: usize, budget: usize },
    #[error("decoded integer overflows {0} bits")]
    Overflow(u32),
    #[error("inconsistent plaintext lanes: {0}")]
    InconsistentLanes(String),
    #[error("plaintext capacity exceeded: {0}")]
    CapacityExceeded(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("approximation failed: {0}")]
    Approx(String),
    #[error("{0}")]
    Format(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
