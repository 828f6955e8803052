use crate::torus::TorusPoint;

/// Everything that can go wrong in the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("resolution {0} is not a positive power of two")]
    InvalidResolution(usize),

    #[error("resolution mismatch: {left} vs {right}")]
    ResolutionMismatch { left: usize, right: usize },

    #[error("expected {expected} cell values, got {got}")]
    WrongCellCount { expected: usize, got: usize },

    #[error("density is not a probability density: {0}")]
    NotProbability(String),

    #[error("observable mode cutoff {cutoff} exceeds resolution/2 = {limit}")]
    CutoffTooHigh { cutoff: u32, limit: usize },

    #[error("MapSpec invariant violated: {0}")]
    InvalidMap(String),

    #[error("CouplingSpec invariant violated: {0}")]
    InvalidCoupling(String),

    #[error("invalid cone: {0}")]
    InvalidCone(String),

    #[error("no convergence inverting at ({}, {}) after {iterations} iterations", point.u, point.v)]
    NoConvergence { point: TorusPoint, iterations: usize },

    #[error("cone invariance violated at ({}, {}) for direction ({}, {})", point.u, point.v, direction[0], direction[1])]
    ConeViolation { point: TorusPoint, direction: [f64; 2] },

    #[error("fixed point not reached after {iterations} iterations (residual {residual:e})")]
    MaxIterationsExceeded { iterations: usize, residual: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
