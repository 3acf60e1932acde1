use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("grid spacing h = {h} must satisfy 0 < h <= epsilon/4 (epsilon = {epsilon})")]
    SpacingRatio { h: f64, epsilon: f64 },

    #[error("epsilon = {epsilon} must be positive and below the domain diameter {diameter}")]
    EpsilonRange { epsilon: f64, diameter: f64 },

    #[error("lattice has no interior nodes")]
    EmptyInterior,

    #[error("payoff evaluated at an interior point {0:?}")]
    InteriorPayoff(Vec<f64>),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("value field length {got} does not match lattice size {expected}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("strategy moved {distance} from the current position, more than epsilon = {epsilon}")]
    StrategyOutOfBall { distance: f64, epsilon: f64 },

    #[error("game started outside the domain at {0:?}")]
    StartOutside(Vec<f64>),

    #[error("all {0} episodes hit the step cap")]
    AllCapped(usize),

    #[error("diagnostic requires {expected} traces: {reason}")]
    WrongMode { expected: &'static str, reason: String },

    #[error("gradient norm {0:e} is below the consistency threshold")]
    DegenerateGradient(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
