//! Loss and its exact gradient with respect to the magnet angles.
//!
//! [`Problem`] caches the point/magnet geometry (which never changes while
//! only angles rotate) and evaluates the composite loss with a hand-derived
//! reverse pass through the robot alignment, the dipole forces and the
//! normalization. [`dual_gradient`] and [`central_difference_gradient`] are
//! independent routes over the plain field code used to check it.

use rayon::prelude::*;

use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::field::{EvaluationGrid, FIELD_EPS};
use crate::geometry::{moment_from_angle, mu0, MagnetArray, RobotMagnet};
use crate::objective::{
    accuracy_from_direction_loss, build_target, total_loss, LossBreakdown, LossConfig, TargetField,
    DEGENERATE_POINT_ERROR, FORCE_EPS,
};
use crate::scalar::{deg_to_rad, Scalar};
use crate::vec3::Vec3;

/// Magnet moments and per-point state of a forward pass.
type Forward<T> = (Vec<Vec3<T>>, Vec<PointState<T>>);

/// Work size (points × magnets) above which points are processed in parallel.
const PARALLEL_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, Copy)]
struct Pair<T> {
    rhat: Vec3<T>,
    /// `μ₀/(4π‖r‖³)`
    kb: T,
    /// `3μ₀/(4π‖r‖⁴)`
    kf: T,
}

#[derive(Debug, Clone, Copy)]
struct PointState<T> {
    unit_flux: Vec3<T>,
    flux_norm: T,
    robot_moment: Vec3<T>,
    force: Vec3<T>,
    force_norm: T,
}

/// A fixed array layout, grid, robot and loss configuration, ready for
/// repeated loss and gradient evaluations over the angle vector.
#[derive(Debug, Clone)]
pub struct Problem<T> {
    template: MagnetArray<T>,
    grid: EvaluationGrid<T>,
    robot: RobotMagnet<T>,
    target: TargetField<T>,
    cfg: LossConfig<T>,
    magnitudes: Vec<T>,
    pairs: Vec<Pair<T>>,
}

impl<T: Scalar> Problem<T> {
    pub fn new(
        template: &MagnetArray<T>,
        grid: &EvaluationGrid<T>,
        robot: &RobotMagnet<T>,
        cfg: LossConfig<T>,
    ) -> Result<Self> {
        cfg.validate()?;
        if template.is_empty() {
            return Err(Error::InvalidParameter("array has no magnets".into()));
        }
        let four_pi = T::lit(4.0) * T::PI();
        let mut pairs = Vec::with_capacity(grid.len() * template.len());
        let mut near = 0usize;
        for p in grid.points() {
            let mut close = false;
            for magnet in template.magnets() {
                let r = *p - magnet.center();
                let d = r.norm();
                if d == T::zero() {
                    return Err(Error::Singularity { point: p.to_f64() });
                }
                close |= d < magnet.validity_radius();
                pairs.push(Pair {
                    rhat: r / d,
                    kb: mu0::<T>() / (four_pi * d * d * d),
                    kf: T::lit(3.0) * mu0::<T>() / (four_pi * d * d * d * d),
                });
            }
            near += close as usize;
        }
        if near > 0 {
            log::warn!(
                "{near} of {} grid points lie within 1.5 magnet diagonals of a source",
                grid.len()
            );
        }
        Ok(Self {
            magnitudes: template.magnets().iter().map(|m| m.moment_magnitude()).collect(),
            target: build_target(grid),
            template: template.clone(),
            grid: grid.clone(),
            robot: *robot,
            cfg,
            pairs,
        })
    }

    /// Same geometry with a different loss configuration.
    pub fn with_config(&self, cfg: LossConfig<T>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, ..self.clone() })
    }

    pub fn config(&self) -> &LossConfig<T> {
        &self.cfg
    }

    pub fn template(&self) -> &MagnetArray<T> {
        &self.template
    }

    pub fn grid(&self) -> &EvaluationGrid<T> {
        &self.grid
    }

    pub fn robot(&self) -> &RobotMagnet<T> {
        &self.robot
    }

    pub fn magnet_count(&self) -> usize {
        self.template.len()
    }

    fn check_angles(&self, angles_deg: &[T]) -> Result<()> {
        if angles_deg.len() != self.magnet_count() {
            return Err(Error::ShapeMismatch {
                expected: self.magnet_count(),
                actual: angles_deg.len(),
            });
        }
        if angles_deg.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("angle".into()));
        }
        Ok(())
    }

    fn moments(&self, angles_deg: &[T]) -> Vec<Vec3<T>> {
        self.magnitudes
            .iter()
            .zip(angles_deg)
            .map(|(&m, &a)| moment_from_angle(m, a))
            .collect()
    }

    fn parallel(&self) -> bool {
        self.pairs.len() >= PARALLEL_THRESHOLD
    }

    fn forward_point(&self, index: usize, moments: &[Vec3<T>]) -> Result<PointState<T>> {
        let n = moments.len();
        let pairs = &self.pairs[index * n..(index + 1) * n];
        let three = T::lit(3.0);
        let five = T::lit(5.0);
        let mut flux = Vec3::zero();
        for (pair, m) in pairs.iter().zip(moments) {
            flux += (pair.rhat * (three * pair.rhat.dot(m)) - *m) * pair.kb;
        }
        let flux_norm = flux.norm();
        if !(flux_norm > T::lit(FIELD_EPS)) {
            return Err(Error::DegenerateField {
                point: self.grid.points()[index].to_f64(),
            });
        }
        let unit_flux = flux / flux_norm;
        let robot_moment = unit_flux * self.robot.moment_magnitude();
        let mut force = Vec3::zero();
        for (pair, m) in pairs.iter().zip(moments) {
            let a = pair.rhat.dot(&robot_moment);
            let rm = pair.rhat.dot(m);
            force +=
                (*m * a + robot_moment * rm + pair.rhat * (m.dot(&robot_moment) - five * rm * a)) * pair.kf;
        }
        if !force.is_finite() {
            return Err(Error::NonFinite(format!(
                "force at {:?}",
                self.grid.points()[index].to_f64()
            )));
        }
        Ok(PointState {
            unit_flux,
            flux_norm,
            robot_moment,
            force,
            force_norm: force.norm(),
        })
    }

    fn forward(&self, angles_deg: &[T]) -> Result<Forward<T>> {
        self.check_angles(angles_deg)?;
        let moments = self.moments(angles_deg);
        let states = if self.parallel() {
            (0..self.grid.len())
                .into_par_iter()
                .map(|i| self.forward_point(i, &moments))
                .collect::<Result<Vec<_>>>()?
        } else {
            (0..self.grid.len())
                .map(|i| self.forward_point(i, &moments))
                .collect::<Result<Vec<_>>>()?
        };
        Ok((moments, states))
    }

    fn breakdown(&self, states: &[PointState<T>]) -> LossBreakdown<T> {
        let eps = T::lit(FORCE_EPS);
        let penalty = T::lit(DEGENERATE_POINT_ERROR);
        let mut direction = T::zero();
        let mut total_force = T::zero();
        for (s, t) in states.iter().zip(self.target.directions()) {
            total_force = total_force + s.force_norm;
            direction = direction
                + if s.force_norm > eps {
                    (s.force / s.force_norm - *t).norm_squared()
                } else {
                    penalty
                };
        }
        let direction = direction / T::lit(states.len() as f64);
        let diff = total_force - self.cfg.target_force;
        let magnitude = diff * diff;
        LossBreakdown {
            direction,
            magnitude,
            total: self.cfg.direction_weight * direction + self.cfg.magnitude_weight * magnitude,
            accuracy: accuracy_from_direction_loss(direction),
            total_force,
        }
    }

    /// Loss terms at the given angles [degrees].
    pub fn loss(&self, angles_deg: &[T]) -> Result<LossBreakdown<T>> {
        let (_, states) = self.forward(angles_deg)?;
        Ok(self.breakdown(&states))
    }

    /// Loss terms and `∂L/∂α` per degree.
    pub fn loss_and_gradient(&self, angles_deg: &[T]) -> Result<(LossBreakdown<T>, Vec<T>)> {
        let (moments, states) = self.forward(angles_deg)?;
        let loss = self.breakdown(&states);
        let dmoments: Vec<Vec3<T>> = self
            .magnitudes
            .iter()
            .zip(angles_deg)
            .map(|(&m, &a)| {
                let (s, c) = deg_to_rad(a).sin_cos();
                Vec3::new(T::zero(), -c * m, -s * m) * (T::PI() / T::lit(180.0))
            })
            .collect();
        let l2_scale = T::lit(2.0) * self.cfg.magnitude_weight * (loss.total_force - self.cfg.target_force);
        let l1_scale = T::lit(2.0) * self.cfg.direction_weight / T::lit(states.len() as f64);
        let n = moments.len();
        let backward = |i: usize| -> Vec<T> {
            let mut grad = vec![T::zero(); n];
            self.backward_point(i, &states[i], &moments, &dmoments, l1_scale, l2_scale, &mut grad);
            grad
        };
        let per_point: Vec<Vec<T>> = if self.parallel() {
            (0..states.len()).into_par_iter().map(backward).collect()
        } else {
            (0..states.len()).map(backward).collect()
        };
        let mut grad = vec![T::zero(); n];
        for g in per_point {
            for (acc, v) in grad.iter_mut().zip(g) {
                *acc = *acc + v;
            }
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient".into()));
        }
        Ok((loss, grad))
    }

    #[allow(clippy::too_many_arguments)]
    fn backward_point(
        &self,
        index: usize,
        state: &PointState<T>,
        moments: &[Vec3<T>],
        dmoments: &[Vec3<T>],
        l1_scale: T,
        l2_scale: T,
        grad: &mut [T],
    ) {
        // zero-force points contribute a constant
        if !(state.force_norm > T::lit(FORCE_EPS)) {
            return;
        }
        let n = moments.len();
        let pairs = &self.pairs[index * n..(index + 1) * n];
        let three = T::lit(3.0);
        let five = T::lit(5.0);

        let out = state.force / state.force_norm;
        let g_out = (out - self.target.directions()[index]) * l1_scale;
        let g_force = (g_out - out * out.dot(&g_out)) / state.force_norm + out * l2_scale;

        // adjoint of the robot moment: Σ (∂f_n/∂m_robot)ᵀ g
        let mut g_robot = Vec3::zero();
        let rg_all: Vec<T> = pairs.iter().map(|p| p.rhat.dot(&g_force)).collect();
        for ((pair, m), &rg) in pairs.iter().zip(moments).zip(&rg_all) {
            let rm = pair.rhat.dot(m);
            g_robot += (pair.rhat * (m.dot(&g_force) - five * rm * rg) + g_force * rm + *m * rg) * pair.kf;
        }
        let u = state.unit_flux;
        let g_flux = (g_robot - u * u.dot(&g_robot)) * (self.robot.moment_magnitude() / state.flux_norm);

        let mr = state.robot_moment;
        let mrg = mr.dot(&g_force);
        for (k, ((pair, dm), &rg)) in pairs.iter().zip(dmoments).zip(&rg_all).enumerate() {
            let a = pair.rhat.dot(&mr);
            let rdm = pair.rhat.dot(dm);
            let through_force =
                (a * g_force.dot(dm) + rdm * mrg + (dm.dot(&mr) - five * rdm * a) * rg) * pair.kf;
            let through_flux = (three * pair.rhat.dot(&g_flux) * rdm - g_flux.dot(dm)) * pair.kb;
            grad[k] = grad[k] + through_force + through_flux;
        }
    }
}

/// `∂L/∂α` per degree for `array` re-angled to `angles_deg`.
pub fn loss_gradient<T: Scalar>(
    angles_deg: &[T],
    array: &MagnetArray<T>,
    grid: &EvaluationGrid<T>,
    robot: &RobotMagnet<T>,
    cfg: &LossConfig<T>,
) -> Result<Vec<T>> {
    Problem::new(array, grid, robot, *cfg)?
        .loss_and_gradient(angles_deg)
        .map(|(_, g)| g)
}

/// Gradient by forward-mode dual numbers through the plain field code; one
/// pass per magnet.
pub fn dual_gradient(
    angles_deg: &[f64],
    array: &MagnetArray<f64>,
    grid: &EvaluationGrid<f64>,
    robot: &RobotMagnet<f64>,
    cfg: &LossConfig<f64>,
) -> Result<Vec<f64>> {
    let array_d = array.cast::<Dual<f64>>();
    let grid_d = grid.cast::<Dual<f64>>();
    let robot_d = robot.cast::<Dual<f64>>();
    let cfg_d = cfg.cast::<Dual<f64>>();
    (0..angles_deg.len())
        .map(|k| {
            let seeded: Vec<Dual<f64>> = angles_deg
                .iter()
                .enumerate()
                .map(|(i, &a)| Dual::new(a, if i == k { 1.0 } else { 0.0 }))
                .collect();
            let loss = total_loss(&array_d.with_angles(&seeded)?, &grid_d, &robot_d, &cfg_d)?;
            Ok(loss.eps)
        })
        .collect()
}

/// Central finite differences of [`total_loss`] with step `h_deg` degrees.
pub fn central_difference_gradient(
    angles_deg: &[f64],
    array: &MagnetArray<f64>,
    grid: &EvaluationGrid<f64>,
    robot: &RobotMagnet<f64>,
    cfg: &LossConfig<f64>,
    h_deg: f64,
) -> Result<Vec<f64>> {
    central_difference_gradient_in::<f64>(angles_deg, array, grid, robot, cfg, h_deg)
}

/// [`central_difference_gradient`] with the loss evaluated in `T`.
///
/// A step of 1e-5° divides the f64 rounding noise of the loss (~1e-16·L) by
/// 1e-5, which swamps small gradient components; evaluating in a wider type
/// such as [`TwoFloat`](twofloat::TwoFloat) removes that floor without
/// changing the difference quotient.
pub fn central_difference_gradient_in<T: Scalar>(
    angles_deg: &[f64],
    array: &MagnetArray<f64>,
    grid: &EvaluationGrid<f64>,
    robot: &RobotMagnet<f64>,
    cfg: &LossConfig<f64>,
    h_deg: f64,
) -> Result<Vec<f64>> {
    let array = array.cast::<T>();
    let grid = grid.cast::<T>();
    let robot = robot.cast::<T>();
    let cfg = cfg.cast::<T>();
    let h = T::lit(h_deg);
    let base: Vec<T> = angles_deg.iter().map(|&a| T::lit(a)).collect();
    let mut shifted = base.clone();
    (0..base.len())
        .map(|k| {
            shifted[k] = base[k] + h;
            let up = total_loss(&array.with_angles(&shifted)?, &grid, &robot, &cfg)?;
            shifted[k] = base[k] - h;
            let down = total_loss(&array.with_angles(&shifted)?, &grid, &robot, &cfg)?;
            shifted[k] = base[k];
            Ok(((up - down) / (h + h)).value())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_array;
    use crate::objective::evaluate_loss;
    use approx::assert_relative_eq;

    fn setup(n: usize) -> (MagnetArray<f64>, EvaluationGrid<f64>, RobotMagnet<f64>) {
        let array = if n == 2 {
            build_array(2, 0.0508, 1.275, 0.0, Some(0.12)).unwrap()
        } else {
            build_array(n, 0.0508, 1.275, 0.0, None).unwrap()
        };
        let grid = EvaluationGrid::new(0.089, 0.010, 8, 8).unwrap();
        (array, grid, RobotMagnet::cylinder(1.32, 1e-3, 2e-3).unwrap())
    }

    #[test]
    fn problem_loss_matches_plain_evaluation() {
        let (array, grid, robot) = setup(4);
        let cfg = LossConfig::new(1.0, 1e3, 0.01).unwrap();
        let angles = [12.0, 250.0, 100.0, 333.0];
        let problem = Problem::new(&array, &grid, &robot, cfg).unwrap();
        let fast = problem.loss(&angles).unwrap();
        let plain = evaluate_loss(&array.with_angles(&angles).unwrap(), &grid, &robot, &cfg).unwrap();
        assert_relative_eq!(fast.direction, plain.direction, max_relative = 1e-12);
        assert_relative_eq!(fast.magnitude, plain.magnitude, max_relative = 1e-10);
        assert_relative_eq!(fast.total_force, plain.total_force, max_relative = 1e-12);
    }

    #[test]
    fn adjoint_matches_dual_numbers() {
        let (array, grid, robot) = setup(4);
        let cfg = LossConfig::new(1.0, 50.0, 0.02).unwrap();
        let angles = [41.0, 170.0, 299.0, 3.5];
        let adjoint = loss_gradient(&angles, &array, &grid, &robot, &cfg).unwrap();
        let dual = dual_gradient(&angles, &array, &grid, &robot, &cfg).unwrap();
        for (a, d) in adjoint.iter().zip(&dual) {
            assert_relative_eq!(*a, *d, max_relative = 1e-9);
        }
    }

    #[test]
    fn symmetric_pair_gradient_at_zero() {
        let (array, grid, robot) = setup(2);
        let g = loss_gradient(&[0.0, 0.0], &array, &grid, &robot, &LossConfig::direction_only()).unwrap();
        assert_relative_eq!(g[0], -g[1], max_relative = 1e-9);
    }

    #[test]
    fn single_precision_tracks_double() {
        let (array, grid, robot) = setup(2);
        let cfg = LossConfig::direction_only();
        let p64 = Problem::new(&array, &grid, &robot, cfg).unwrap();
        let p32 = Problem::new(
            &array.cast::<f32>(),
            &grid.cast::<f32>(),
            &robot.cast::<f32>(),
            cfg.cast(),
        )
        .unwrap();
        let l64 = p64.loss(&[341.0, 19.0]).unwrap().direction;
        let l32 = p32.loss(&[341.0, 19.0]).unwrap().direction;
        assert!((l64 - l32 as f64).abs() < 1e-4);
    }

    #[test]
    fn extended_differences_resolve_small_components() {
        use twofloat::TwoFloat;
        let array = build_array(8, 0.0508, 1.275, 0.0, Some(0.12)).unwrap();
        let grid = EvaluationGrid::new(0.089, 0.010, 20, 20).unwrap();
        let robot = RobotMagnet::cylinder(1.32, 1e-3, 2e-3).unwrap();
        let cfg = LossConfig::new(1.0, 1.0, 0.37).unwrap();
        let angles = [17.0, 203.5, 88.0, 310.0, 145.0, 266.0, 5.0, 99.0];
        let exact = dual_gradient(&angles, &array, &grid, &robot, &cfg).unwrap();
        let wide =
            central_difference_gradient_in::<TwoFloat>(&angles, &array, &grid, &robot, &cfg, 1e-5).unwrap();
        for (d, w) in exact.iter().zip(&wide) {
            assert_relative_eq!(*d, *w, max_relative = 1e-7);
        }
    }

    #[test]
    fn wrong_angle_count() {
        let (array, grid, robot) = setup(2);
        let problem = Problem::new(&array, &grid, &robot, LossConfig::direction_only()).unwrap();
        assert!(matches!(problem.loss(&[1.0]), Err(Error::ShapeMismatch { .. })));
        assert!(matches!(problem.loss(&[1.0, f64::NAN]), Err(Error::NonFinite(_))));
    }
}
