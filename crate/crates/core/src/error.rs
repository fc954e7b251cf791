use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty family")]
    EmptyFamily,

    #[error("no paths")]
    NoPaths,

    #[error("unstable grid: dt = {dt} exceeds dx^2 / sigma_max^2 = {limit}")]
    UnstableGrid { dt: f64, limit: f64 },

    #[error("bad payoff: non-finite value at x = {x}")]
    BadPayoff { x: f64 },

    #[error("scenario out of band: volatility {value} outside [{sigma_min}, {sigma_max}]")]
    ScenarioOutOfBand { value: f64, sigma_min: f64, sigma_max: f64 },

    #[error("point (t = {t}, x = {x}) lies outside the solution grid")]
    OutOfRange { t: f64, x: f64 },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("declared bound violated: |{what}| = {value} > {bound} at t = {t}, x = {x}")]
    BoundViolated { what: &'static str, value: f64, bound: f64, t: f64, x: f64 },

    #[error("unsupported BDG exponent p = {0} (supported: 2, 4)")]
    UnsupportedExponent(f64),

    #[error("instance too large: {count} candidates exceed the limit of {limit}")]
    InstanceTooLarge { count: u128, limit: u128 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
