//! Inverse design of permanent-magnet arrays that hold a magnetic robot in a
//! stable in-plane force trap.
//!
//! Cubic magnets sit on the Z-axis and may only rotate about X. The force on
//! a robot magnet aligned with the local flux density is evaluated on a grid
//! around the desired trap point; the magnet angles are then optimized with
//! Adam so the force directions converge on the trap.
//!
//! Numeric code is generic over [`Scalar`]; the aliases below fix it to
//! `f64` (the default everywhere) or `f32`.

// `!(x > 0)` is used on purpose so NaN inputs are rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dual;
pub mod error;
pub mod field;
pub mod geometry;
pub mod objective;
pub mod optimizer;
pub mod scalar;
pub mod vec3;

pub use dual::Dual;
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use vec3::Vec3;

pub type Vec3F64 = vec3::Vec3<f64>;
pub type Vec3F32 = vec3::Vec3<f32>;
pub type MagnetF64 = geometry::Magnet<f64>;
pub type MagnetF32 = geometry::Magnet<f32>;
pub type MagnetArrayF64 = geometry::MagnetArray<f64>;
pub type MagnetArrayF32 = geometry::MagnetArray<f32>;
pub type RobotMagnetF64 = geometry::RobotMagnet<f64>;
pub type RobotMagnetF32 = geometry::RobotMagnet<f32>;
pub type EvaluationGridF64 = field::EvaluationGrid<f64>;
pub type EvaluationGridF32 = field::EvaluationGrid<f32>;
pub type ForceFieldF64 = field::ForceField<f64>;
pub type ForceFieldF32 = field::ForceField<f32>;
pub type LossConfigF64 = objective::LossConfig<f64>;
pub type ProblemF64 = optimizer::Problem<f64>;
pub type ProblemF32 = optimizer::Problem<f32>;
pub type AdamConfigF64 = optimizer::AdamConfig<f64>;
