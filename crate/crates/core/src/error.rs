use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("size mismatch: expected {expected} values, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite multiplier value at grid index {0}")]
    NonFiniteMultiplier(usize),

    #[error("box too small: {0}")]
    BoxTooSmall(String),

    #[error("energy window touches the threshold set: {0}")]
    ThresholdOverlap(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("continuum evaluation with window policy requires a built window extension")]
    ExtensionMissing,

    #[error("point {coordinate} lies outside the reliable radius {radius}")]
    OutsideReliableRadius { coordinate: f64, radius: f64 },

    #[error("energy drift {drift:e} exceeds tolerance {tolerance:e} after {halvings} step halvings")]
    EnergyDrift {
        drift: f64,
        tolerance: f64,
        halvings: usize,
    },

    #[error("Newton inversion did not converge at t = {time}, grid point {point} (residual {residual:e})")]
    NewtonFailure {
        time: f64,
        point: usize,
        residual: f64,
    },

    #[error("image containment violated at t = {time}, grid point {point}: p0(eta*) = {energy}")]
    ImageContainment { time: f64, point: usize, energy: f64 },

    #[error("characteristic fan check failed: {0}")]
    FanCheck(String),

    #[error("quadrature failed to reach tolerance {0:e}")]
    Quadrature(f64),

    #[error("Chebyshev expansion: {0}")]
    Chebyshev(String),

    #[error("time {time} outside table range [{start}, {end}]")]
    TimeOutOfRange { time: f64, start: f64, end: f64 },

    #[error("insufficient range for a rate fit: {0}")]
    InsufficientRange(String),

    #[error("boundary mass {mass:e} exceeds threshold {threshold:e} at t = {time}")]
    BoundaryBreach { mass: f64, threshold: f64, time: f64 },

    #[error("non-convergent tail: {0}")]
    NonConvergent(String),

    #[error("config: {0}")]
    Config(String),

    #[error("parse: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
