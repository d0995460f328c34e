use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("max_freq {max_freq} must be below N/2 = {half}")]
    FrequencyTooHigh { max_freq: usize, half: usize },

    #[error("not positive definite at point {point}: min eigenvalue {min_eig:e}")]
    NotPositiveDefinite { point: usize, min_eig: f64 },

    #[error("density must be positive, got {value:e} at point {point}")]
    NonPositiveDensity { point: usize, value: f64 },

    #[error("unsupported valence {0}")]
    UnsupportedValence(usize),

    #[error("tensor is not {expected} (residual {residual:e})")]
    KindMismatch { expected: &'static str, residual: f64 },

    #[error("precondition `{what}` failed: residual {residual:e} > {tol:e}")]
    Precondition {
        what: &'static str,
        residual: f64,
        tol: f64,
    },

    #[error("complex structure must be constant in the torus chart (variation {0:e})")]
    NonConstantComplexStructure(f64),

    #[error("odd real dimension {0} cannot carry a complex structure")]
    OddDimension(usize),

    #[error("J-transport aborted at t = {t}: residual {residual:e}")]
    OdeAbort { t: f64, residual: f64 },

    #[error("metric curve left the positivity cone at t = {0}")]
    LeftCone(f64),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
}

pub type Result<T> = std::result::Result<T, Error>;
