use thiserror::Error;

/// Errors raised by the geometric, dynamical and symbolic layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("rejected parameter: {0}")]
    RejectedParameter(String),

    #[error("invalid surface: {0}")]
    InvalidSurface(String),

    #[error("cylinder decomposition failed: {0}")]
    DecompositionFailure(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("not a parabolic direction: moduli {0} and {1} differ")]
    NotParabolic(String, String),

    #[error("invalid matrix: determinant {0} is not 1")]
    InvalidMatrix(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("index {index} out of range for {len} components")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("pairing error: {0}")]
    Pairing(String),

    #[error("invalid edge generator: {0}")]
    InvalidEdgeGenerator(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
