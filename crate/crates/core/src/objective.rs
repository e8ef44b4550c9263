//! Target directions, direction/magnitude losses and the accuracy score.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{evaluate_grid, EvaluationGrid, ForceField};
use crate::geometry::{MagnetArray, RobotMagnet};
use crate::scalar::Scalar;
use crate::vec3::Vec3;

/// Force magnitude below which a direction is undefined [N].
pub const FORCE_EPS: f64 = 1e-18;

/// Squared direction error charged to a zero-force point: the worst case,
/// as if the force pointed straight away from the trap.
pub const DEGENERATE_POINT_ERROR: f64 = 4.0;

/// Weights of the composite loss `λ₁·L₁ + λ₂·L₂` and the force target `Ŷ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossConfig<T> {
    pub direction_weight: T,
    pub magnitude_weight: T,
    /// Desired `Σ‖F‖` over the whole grid [N].
    pub target_force: T,
}

impl<T: Scalar> LossConfig<T> {
    pub fn new(direction_weight: T, magnitude_weight: T, target_force: T) -> Result<Self> {
        let cfg = Self {
            direction_weight,
            magnitude_weight,
            target_force,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Pure direction loss: `λ₁ = 1`, `λ₂ = 0`.
    pub fn direction_only() -> Self {
        Self {
            direction_weight: T::one(),
            magnitude_weight: T::zero(),
            target_force: T::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: T| v >= T::zero() && v.is_finite();
        if !nonneg(self.direction_weight) || !nonneg(self.magnitude_weight) {
            return Err(Error::InvalidParameter(
                "loss weights must be finite and non-negative".into(),
            ));
        }
        if self.direction_weight == T::zero() && self.magnitude_weight == T::zero() {
            return Err(Error::InvalidParameter(
                "at least one loss weight must be positive".into(),
            ));
        }
        if !nonneg(self.target_force) {
            return Err(Error::InvalidParameter(
                "target force must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> LossConfig<U> {
        LossConfig {
            direction_weight: U::lit(self.direction_weight.value()),
            magnitude_weight: U::lit(self.magnitude_weight.value()),
            target_force: U::lit(self.target_force.value()),
        }
    }
}

/// Unit vectors pointing from each grid point toward the trap.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetField<T> {
    directions: Vec<Vec3<T>>,
}

impl<T: Scalar> TargetField<T> {
    pub fn directions(&self) -> &[Vec3<T>] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

pub fn build_target<T: Scalar>(grid: &EvaluationGrid<T>) -> TargetField<T> {
    let trap = grid.trap_point();
    TargetField {
        directions: grid
            .points()
            .iter()
            .map(|p| {
                let d = trap - *p;
                d / d.norm()
            })
            .collect(),
    }
}

/// Per-point force directions; zero-force points are flagged and carry the
/// zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedOutput<T> {
    directions: Vec<Vec3<T>>,
    degenerate: Vec<bool>,
}

impl<T: Scalar> NormalizedOutput<T> {
    pub fn from_directions(directions: Vec<Vec3<T>>) -> Self {
        let degenerate = vec![false; directions.len()];
        Self {
            directions,
            degenerate,
        }
    }

    pub fn directions(&self) -> &[Vec3<T>] {
        &self.directions
    }

    pub fn degenerate(&self) -> &[bool] {
        &self.degenerate
    }

    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|d| **d).count()
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

pub fn normalize_output<T: Scalar>(field: &ForceField<T>) -> NormalizedOutput<T> {
    let eps = T::lit(FORCE_EPS);
    let mut degenerate = Vec::with_capacity(field.len());
    let directions = field
        .forces()
        .iter()
        .map(|f| {
            let n = f.norm();
            let zero = !(n > eps);
            degenerate.push(zero);
            if zero {
                Vec3::zero()
            } else {
                *f / n
            }
        })
        .collect();
    NormalizedOutput {
        directions,
        degenerate,
    }
}

/// Mean squared distance between output and target directions, in `[0, 4]`.
pub fn direction_loss<T: Scalar>(output: &NormalizedOutput<T>, target: &TargetField<T>) -> Result<T> {
    if output.len() != target.len() {
        return Err(Error::ShapeMismatch {
            expected: target.len(),
            actual: output.len(),
        });
    }
    if target.is_empty() {
        return Err(Error::InvalidParameter("empty target field".into()));
    }
    let penalty = T::lit(DEGENERATE_POINT_ERROR);
    let sum = output
        .directions
        .iter()
        .zip(&output.degenerate)
        .zip(&target.directions)
        .fold(T::zero(), |acc, ((o, &bad), t)| {
            acc + if bad { penalty } else { (*o - *t).norm_squared() }
        });
    Ok(sum / T::lit(target.len() as f64))
}

/// `(Σ‖F‖ − Ŷ)²`.
pub fn magnitude_loss<T: Scalar>(field: &ForceField<T>, target_force: T) -> T {
    let diff = field.total_magnitude() - target_force;
    diff * diff
}

/// `1 − L₁/4`, i.e. `(1 + mean cosine similarity)/2` for unit directions.
pub fn accuracy<T: Scalar>(output: &NormalizedOutput<T>, target: &TargetField<T>) -> Result<T> {
    direction_loss(output, target).map(accuracy_from_direction_loss)
}

#[inline]
pub fn accuracy_from_direction_loss<T: Scalar>(direction_loss: T) -> T {
    T::one() - direction_loss / T::lit(4.0)
}

/// Every term of the composite loss for one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown<T> {
    pub direction: T,
    pub magnitude: T,
    pub total: T,
    pub accuracy: T,
    /// `Σ‖F‖` over the grid [N].
    pub total_force: T,
}

/// Evaluates the grid and reports all loss terms.
pub fn evaluate_loss<T: Scalar>(
    array: &MagnetArray<T>,
    grid: &EvaluationGrid<T>,
    robot: &RobotMagnet<T>,
    cfg: &LossConfig<T>,
) -> Result<LossBreakdown<T>> {
    let field = evaluate_grid(array, grid, robot)?;
    let output = normalize_output(&field);
    let target = build_target(grid);
    let direction = direction_loss(&output, &target)?;
    let magnitude = magnitude_loss(&field, cfg.target_force);
    Ok(LossBreakdown {
        direction,
        magnitude,
        total: cfg.direction_weight * direction + cfg.magnitude_weight * magnitude,
        accuracy: accuracy_from_direction_loss(direction),
        total_force: field.total_magnitude(),
    })
}

/// `λ₁·L₁ + λ₂·L₂` for `array` (with its current angles).
pub fn total_loss<T: Scalar>(
    array: &MagnetArray<T>,
    grid: &EvaluationGrid<T>,
    robot: &RobotMagnet<T>,
    cfg: &LossConfig<T>,
) -> Result<T> {
    evaluate_loss(array, grid, robot, cfg).map(|b| b.total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_array;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid() -> EvaluationGrid<f64> {
        EvaluationGrid::new(0.089, 0.010, 6, 6).unwrap()
    }

    fn robot() -> RobotMagnet<f64> {
        RobotMagnet::cylinder(1.32, 1e-3, 2e-3).unwrap()
    }

    #[test]
    fn target_examples() {
        let trap = Vec3::new(0.0, 0.089, 0.0);
        let points = vec![
            Vec3::new(0.010, 0.089, 0.0),
            Vec3::new(0.0, 0.079, 0.0),
            Vec3::new(0.010, 0.099, 0.0),
        ];
        let grid = EvaluationGrid::with_points(trap, points).unwrap();
        let t = build_target(&grid);
        let d = t.directions();
        assert_relative_eq!(d[0].x, -1.0);
        assert!(f64::abs(d[0].y) < 1e-12);
        assert!(f64::abs(d[1].x) < 1e-15);
        assert_relative_eq!(d[1].y, 1.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(d[2].x, -h, max_relative = 1e-12);
        assert_relative_eq!(d[2].y, -h, max_relative = 1e-12);
    }

    #[test]
    fn target_is_unit_and_points_at_trap() {
        let g = grid();
        let t = build_target(&g);
        for (p, d) in g.points().iter().zip(t.directions()) {
            let to_trap = g.trap_point() - *p;
            assert!((d.norm() - 1.0).abs() < 1e-12);
            assert!(d.dot(&to_trap) > 0.0);
            assert!(d.cross(&to_trap).norm() <= 1e-12);
        }
    }

    #[test]
    fn normalize_examples() {
        let points = vec![Vec3::new(0.0, 0.08, 0.0), Vec3::new(0.0, 0.09, 0.0)];
        let forces = vec![Vec3::new(0.0, -2e-4, 0.0), Vec3::zero()];
        let field = ForceField::from_parts(points, forces, None).unwrap();
        let out = normalize_output(&field);
        assert_eq!(out.directions()[0], Vec3::new(0.0, -1.0, 0.0));
        assert_eq!(out.directions()[1], Vec3::zero());
        assert_eq!(out.degenerate(), &[false, true]);
    }

    fn synthetic(target: &TargetField<f64>, map: impl Fn(Vec3<f64>) -> Vec3<f64>) -> NormalizedOutput<f64> {
        NormalizedOutput::from_directions(target.directions().iter().map(|d| map(*d)).collect())
    }

    #[test]
    fn direction_loss_reference_values() {
        let t = build_target(&grid());
        let same = synthetic(&t, |d| d);
        let opposite = synthetic(&t, |d| -d);
        // rotate in-plane targets by 90° about z
        let orthogonal = synthetic(&t, |d| Vec3::new(-d.y, d.x, 0.0));
        assert_eq!(direction_loss(&same, &t).unwrap(), 0.0);
        assert_relative_eq!(direction_loss(&opposite, &t).unwrap(), 4.0, max_relative = 1e-14);
        assert_relative_eq!(
            direction_loss(&orthogonal, &t).unwrap(),
            2.0,
            max_relative = 1e-14
        );
        assert_eq!(accuracy(&same, &t).unwrap(), 1.0);
        assert!(accuracy(&opposite, &t).unwrap().abs() < 1e-14);
        assert_relative_eq!(accuracy(&orthogonal, &t).unwrap(), 0.5, max_relative = 1e-14);
    }

    #[test]
    fn degenerate_points_charge_maximum_error() {
        let t = build_target(&grid());
        let points = grid().points().to_vec();
        let field = ForceField::from_parts(points.clone(), vec![Vec3::zero(); points.len()], None).unwrap();
        let out = normalize_output(&field);
        assert_eq!(direction_loss(&out, &t).unwrap(), DEGENERATE_POINT_ERROR);
    }

    #[test]
    fn shape_mismatch() {
        let t = build_target(&grid());
        let out = NormalizedOutput::from_directions(vec![Vec3::new(1.0, 0.0, 0.0)]);
        assert!(matches!(
            direction_loss(&out, &t),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn magnitude_loss_examples() {
        let points = vec![Vec3::new(0.0, 0.08, 0.0), Vec3::new(0.0, 0.09, 0.0)];
        let forces = vec![Vec3::new(3.0, 4.0, 0.0), Vec3::new(0.0, 0.0, 1.0)];
        let field = ForceField::from_parts(points, forces, None).unwrap();
        assert_eq!(magnitude_loss(&field, 6.0), 0.0);
        assert_eq!(magnitude_loss(&field, 0.0), 36.0);
    }

    #[test]
    fn doubling_remanence_quadruples_magnitude_loss() {
        let array = build_array(2, 0.0508, 1.275, 0.0, Some(0.12))
            .unwrap()
            .with_angles(&[330.0, 25.0])
            .unwrap();
        let g = grid();
        let cfg = LossConfig::new(0.0, 1.0, 0.0).unwrap();
        let base = evaluate_loss(&array, &g, &robot(), &cfg).unwrap();
        let doubled = evaluate_loss(&array.scale_remanence(2.0).unwrap(), &g, &robot(), &cfg).unwrap();
        assert_relative_eq!(doubled.total_force, 2.0 * base.total_force, max_relative = 1e-12);
        assert_relative_eq!(doubled.magnitude, 4.0 * base.magnitude, max_relative = 1e-12);
    }

    #[test]
    fn loss_weight_limits() {
        let array = build_array(2, 0.0508, 1.275, 0.0, Some(0.12))
            .unwrap()
            .with_angles(&[300.0, 40.0])
            .unwrap();
        let g = grid();
        let direction_only = LossConfig::new(2.5, 0.0, 123.0).unwrap();
        let b = evaluate_loss(&array, &g, &robot(), &direction_only).unwrap();
        assert_eq!(b.total, 2.5 * b.direction);
        let matched = LossConfig::new(0.0, 1.0, b.total_force).unwrap();
        assert_eq!(total_loss(&array, &g, &robot(), &matched).unwrap(), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(LossConfig::new(0.0, 0.0, 0.0).is_err());
        assert!(LossConfig::new(-1.0, 1.0, 0.0).is_err());
        assert!(LossConfig::new(1.0, 1.0, -1.0).is_err());
        assert!(LossConfig::new(1.0, 0.0, 0.0).is_ok());
    }

    #[test]
    fn direction_loss_invariant_under_remanence_scaling() {
        let array = build_array(4, 0.02, 1.2, 0.0, None)
            .unwrap()
            .with_angles(&[10.0, 200.0, 95.0, 310.0])
            .unwrap();
        let g = grid();
        let cfg = LossConfig::direction_only();
        let a = total_loss(&array, &g, &robot(), &cfg).unwrap();
        let b = total_loss(&array.scale_remanence(3.0).unwrap(), &g, &robot(), &cfg).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-10);
    }

    #[test]
    fn direction_loss_invariant_under_point_permutation() {
        let array = build_array(2, 0.0508, 1.275, 0.0, Some(0.12))
            .unwrap()
            .with_angles(&[341.0, 19.0])
            .unwrap();
        let g = grid();
        let order: Vec<usize> = (0..g.len()).rev().collect();
        let cfg = LossConfig::direction_only();
        let a = total_loss(&array, &g, &robot(), &cfg).unwrap();
        let b = total_loss(&array, &g.permuted(&order).unwrap(), &robot(), &cfg).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    fn unit(theta: f64, phi: f64) -> Vec3<f64> {
        Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
    }

    proptest! {
        #[test]
        fn direction_loss_cosine_identity(angles in proptest::collection::vec((0.0f64..3.0, 0.0f64..6.0), 36)) {
            let t = build_target(&grid());
            let dirs: Vec<_> = angles.iter().map(|(a, b)| unit(*a, *b)).collect();
            let mean_cos = dirs.iter().zip(t.directions()).map(|(o, d)| o.dot(d)).sum::<f64>() / 36.0;
            let out = NormalizedOutput::from_directions(dirs);
            let l1 = direction_loss(&out, &t).unwrap();
            prop_assert!((l1 - (2.0 - 2.0 * mean_cos)).abs() <= 1e-12);
            prop_assert!((accuracy(&out, &t).unwrap() - (1.0 + mean_cos) / 2.0).abs() <= 1e-12);
        }

        #[test]
        fn accuracy_decreases_with_loss(a in 0.0f64..4.0, b in 0.0f64..4.0) {
            prop_assume!(a < b);
            prop_assert!(accuracy_from_direction_loss(a) > accuracy_from_direction_loss(b));
        }
    }
}
