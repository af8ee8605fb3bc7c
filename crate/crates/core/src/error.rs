use thiserror::Error;

/// Errors produced by the pricing, symmetry and oracle routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point outside domain: {0}")]
    Domain(String),

    #[error("step size error: {0}")]
    StepSize(String),

    #[error("point is off the barrier curve: |x - x_b(t)| = {distance:e} exceeds {tolerance:e}")]
    OffBarrier { distance: f64, tolerance: f64 },

    #[error("collocation system is rank deficient: {0}")]
    RankDeficient(String),

    #[error("terminal data is not representable in the reduced basis (relative residual {residual:e})")]
    FitFailure { residual: f64 },

    #[error("degenerate generator: {0}")]
    DegenerateGenerator(String),

    #[error("query is not in the interior region: {0}")]
    Region(String),

    #[error("non-finite value in finite-difference solve at time step {step}")]
    Instability { step: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
