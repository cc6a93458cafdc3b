use thiserror::Error;

/// Errors raised by the geometry, loop-space and orchestration layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point z={z} outside the surface domain [{lo}, {hi}]")]
    Domain { z: f64, lo: f64, hi: f64 },
    #[error("metric is not positive definite at (theta={theta}, z={z})")]
    NotPositiveDefinite { theta: f64, z: f64 },
    #[error("operation requires a revolution-symmetric metric, got {0}")]
    UnsupportedMode(&'static str),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("geodesic connection failed after {iterations} iterations (residual {residual:e})")]
    Connection { iterations: usize, residual: f64 },
    #[error("segment length {length} exceeds cap {cap}")]
    SegmentTooLong { length: f64, cap: f64 },
    #[error("loop enters the pole exclusion disc (z={z} < {z_pole})")]
    PoleExclusion { z: f64, z_pole: f64 },
    #[error("invalid loop: {0}")]
    InvalidLoop(String),
    #[error("segment cache is stale; reconnect the loop first")]
    StaleSegments,
    #[error("loop is not critical (relative gradient norm {0:e})")]
    NotCritical(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
