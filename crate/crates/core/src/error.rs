//! Crate-wide error type.
//!
//! Numerical routines return `Err` for domain violations (bad configs,
//! functionals evaluated outside their domain, time stepping hitting a
//! singularity). Shape and binding mismatches between fields and manifold
//! specs are programmer errors and panic via asserts instead.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Manifold spec violates a resolution or dimension constraint.
    #[error("invalid manifold spec: {0}")]
    InvalidSpec(String),

    /// Config file or field failed validation.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A functional was evaluated outside its domain.
    #[error("domain error: {0}")]
    DomainError(String),

    /// A field that must be normalized (unit L^2 mass) is not.
    #[error("field not normalized: integral u^2 dvol = {0}")]
    NotNormalized(f64),

    /// A field that must be strictly positive has a non-positive node.
    #[error("field not strictly positive (min value {0})")]
    NonPositiveField(f64),

    /// A field with zero L^2 mass cannot be normalized.
    #[error("cannot normalize a field with zero mass")]
    ZeroField,

    /// tau must be strictly positive.
    #[error("tau must be positive, got {0}")]
    NonPositiveTau(f64),

    /// Flow reached the extinction time of the round sphere.
    #[error("flow reached singular time near t = {0}")]
    SingularTime(f64),

    /// Explicit step exceeds the parabolic stability bound.
    #[error("step dt = {dt} exceeds stability bound {bound} at t = {t}")]
    StepTooLarge { dt: f64, bound: f64, t: f64 },

    /// Requested time does not lie on the stored uniform grid.
    #[error("time {0} does not lie on the trajectory grid")]
    TimeMisaligned(f64),

    /// Backward heat step produced a non-positive density.
    #[error("positivity lost in backward solve at t = {0}")]
    PositivityLost(f64),

    /// An iterative solver did not reach its tolerance.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// The shift hypothesis a > -lambda0 of the monotonicity statement fails.
    #[error("hypothesis violated: a = {a} is not greater than -lambda0 = {neg_lambda0}")]
    HypothesisViolated { a: f64, neg_lambda0: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed data file: {0}")]
    MalformedFile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
