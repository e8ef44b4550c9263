use thiserror::Error;

use crate::vec3::Vec3;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("magnet count must be even and at least 2, got {0}")]
    OddMagnetCount(usize),

    #[error("pitch {pitch} m is below the face-diagonal bound {min} m; magnets would collide when rotated")]
    PitchTooSmall { pitch: f64, min: f64 },

    #[error("field evaluated at a source position {point:?}")]
    Singularity { point: Vec3<f64> },

    #[error("flux density vanishes at {point:?}; robot orientation is undefined")]
    DegenerateField { point: Vec3<f64> },

    #[error("shape mismatch: expected {expected} entries, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("no grid points within radius {radius} m of the requested center")]
    EmptyRadius { radius: f64 },

    #[error("low-force region is empty: no sample below {threshold} N near the trap")]
    EmptyRegion { threshold: f64 },

    #[error("B_z does not change sign between y = {y_min} m and y = {y_max} m")]
    NoSignChange { y_min: f64, y_max: f64 },

    #[error("operation requires exactly {expected} magnets, array has {actual}")]
    MagnetCount { expected: usize, actual: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("optimization failed: {0}")]
    OptimizationFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
