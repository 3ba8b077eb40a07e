use thiserror::Error;

/// Errors raised by state construction, channels, measurements and the runner.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("singular covariance matrix")]
    SingularCovariance,
    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),
    #[error("hbar mismatch: {0} vs {1}")]
    HbarMismatch(f64, f64),
    #[error("invalid mode selection: {0}")]
    InvalidModes(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("every peak was removed")]
    EmptyMixture,
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("unphysical parameters: {0}")]
    Unphysical(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("outcome has zero probability (p = {0:e})")]
    ZeroProbabilityOutcome(f64),
    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),
    #[error("rejection sampler stalled after {iterations} iterations (expected acceptance {expected_acceptance:.3e})")]
    SamplingStall {
        iterations: u64,
        expected_acceptance: f64,
    },
    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
