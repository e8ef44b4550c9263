//! Point-dipole flux density and dipole-dipole forces.
//!
//! A robot magnet placed at a grid point is assumed to align with the local
//! flux density, so its moment is recomputed from the total field at every
//! point before the per-magnet forces are summed.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{mu0, Magnet, MagnetArray, RobotMagnet};
use crate::scalar::Scalar;
use crate::vec3::Vec3;

/// Flux-density magnitude below which the robot direction is undefined [T].
pub const FIELD_EPS: f64 = 1e-12;

/// Minimum clearance between a grid point and the trap point [m].
pub const GRID_TRAP_EPS: f64 = 1e-9;

/// Dipole flux density at offset `r` from a source with moment `m`:
/// `μ₀/(4π‖r‖³)·(3r̂r̂ᵀ − I)·m`.
#[inline]
pub fn dipole_flux<T: Scalar>(r: Vec3<T>, m: Vec3<T>) -> Vec3<T> {
    let d2 = r.norm_squared();
    let d = d2.sqrt();
    let rhat = r / d;
    let k = mu0::<T>() / (T::lit(4.0) * T::PI() * d2 * d);
    (rhat * (T::lit(3.0) * rhat.dot(&m)) - m) * k
}

/// Force on a dipole `target` at offset `r` from dipole `source`:
/// `3μ₀/(4π‖r‖⁴)·[(r̂·m_t)m_s + (r̂·m_s)m_t + (m_s·m_t − 5(r̂·m_s)(r̂·m_t))r̂]`.
#[inline]
pub fn dipole_force<T: Scalar>(r: Vec3<T>, source: Vec3<T>, target: Vec3<T>) -> Vec3<T> {
    let d2 = r.norm_squared();
    let d = d2.sqrt();
    let rhat = r / d;
    let k = T::lit(3.0) * mu0::<T>() / (T::lit(4.0) * T::PI() * d2 * d2);
    let rt = rhat.dot(&target);
    let rs = rhat.dot(&source);
    (source * rt + target * rs + rhat * (source.dot(&target) - T::lit(5.0) * rs * rt)) * k
}

fn offset_from<T: Scalar>(point: &Vec3<T>, magnet: &Magnet<T>) -> Result<Vec3<T>> {
    let r = *point - magnet.center();
    if r.norm_squared() == T::zero() {
        return Err(Error::Singularity {
            point: point.to_f64(),
        });
    }
    Ok(r)
}

fn checked<T: Scalar>(v: Vec3<T>, point: &Vec3<T>) -> Result<Vec3<T>> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Singularity {
            point: point.to_f64(),
        })
    }
}

/// Flux density of one magnet at `point`.
///
/// Logs a warning when the point is closer than 1.5 space diagonals to the
/// magnet, where the dipole model loses accuracy.
pub fn flux_density_single<T: Scalar>(point: &Vec3<T>, magnet: &Magnet<T>) -> Result<Vec3<T>> {
    let r = offset_from(point, magnet)?;
    if r.norm() < magnet.validity_radius() {
        log::warn!(
            "point {:?} is within {:.4} m of a magnet center; dipole model is inaccurate here",
            point.to_f64(),
            magnet.validity_radius().value()
        );
    }
    checked(dipole_flux(r, magnet.moment()), point)
}

fn flux_total_quiet<T: Scalar>(point: &Vec3<T>, array: &MagnetArray<T>) -> Result<Vec3<T>> {
    let mut b = Vec3::zero();
    for magnet in array.magnets() {
        b += dipole_flux(offset_from(point, magnet)?, magnet.moment());
    }
    checked(b, point)
}

/// Sum of the single-magnet flux densities at `point`.
pub fn flux_density_total<T: Scalar>(point: &Vec3<T>, array: &MagnetArray<T>) -> Result<Vec3<T>> {
    let mut b = Vec3::zero();
    for magnet in array.magnets() {
        b += flux_density_single(point, magnet)?;
    }
    checked(b, point)
}

/// Robot moment `Br·V/μ₀ · B̂` for a given flux density.
pub fn robot_moment_from_flux<T: Scalar>(
    flux: Vec3<T>,
    robot: &RobotMagnet<T>,
    point: &Vec3<T>,
) -> Result<Vec3<T>> {
    let norm = flux.norm();
    if !(norm > T::lit(FIELD_EPS)) {
        return Err(Error::DegenerateField {
            point: point.to_f64(),
        });
    }
    Ok(flux * (robot.moment_magnitude() / norm))
}

/// Moment of a robot at `point` aligned with the array's flux density there.
pub fn robot_moment<T: Scalar>(
    point: &Vec3<T>,
    array: &MagnetArray<T>,
    robot: &RobotMagnet<T>,
) -> Result<Vec3<T>> {
    robot_moment_from_flux(flux_density_total(point, array)?, robot, point)
}

/// Force exerted by one magnet on a robot moment at `point`.
pub fn force_single<T: Scalar>(
    point: &Vec3<T>,
    magnet: &Magnet<T>,
    robot_moment: &Vec3<T>,
) -> Result<Vec3<T>> {
    let r = offset_from(point, magnet)?;
    checked(dipole_force(r, magnet.moment(), *robot_moment), point)
}

/// Total force on a self-aligned robot at `point`, with the flux density used
/// for the alignment. Unlike [`flux_density_single`] this never logs.
pub fn force_and_flux<T: Scalar>(
    point: &Vec3<T>,
    array: &MagnetArray<T>,
    robot: &RobotMagnet<T>,
) -> Result<(Vec3<T>, Vec3<T>)> {
    let flux = flux_total_quiet(point, array)?;
    let m_robot = robot_moment_from_flux(flux, robot, point)?;
    let mut force = Vec3::zero();
    for magnet in array.magnets() {
        force += dipole_force(offset_from(point, magnet)?, magnet.moment(), m_robot);
    }
    Ok((checked(force, point)?, flux))
}

/// Total force on the robot at `point`; the robot moment is computed once
/// from the total field and then every magnet's contribution is summed.
pub fn force_total<T: Scalar>(
    point: &Vec3<T>,
    array: &MagnetArray<T>,
    robot: &RobotMagnet<T>,
) -> Result<Vec3<T>> {
    force_and_flux(point, array, robot).map(|(f, _)| f)
}

/// In-plane sample points around the trap, `i` columns by `j` rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationGrid<T> {
    points: Vec<Vec3<T>>,
    columns: usize,
    rows: usize,
    half_width: T,
    trap_point: Vec3<T>,
}

impl<T: Scalar> EvaluationGrid<T> {
    /// Evenly spaced `columns × rows` points over `[−w, w]²` centered on
    /// `(0, trap_distance, 0)`, ordered row by row (x varies fastest).
    pub fn new(trap_distance: T, half_width: T, columns: usize, rows: usize) -> Result<Self> {
        if columns == 0 || rows == 0 {
            return Err(Error::InvalidParameter(
                "grid resolution must be at least 1x1".into(),
            ));
        }
        if !(half_width > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "grid half-width must be positive, got {}",
                half_width.value()
            )));
        }
        let trap_point = Vec3::new(T::zero(), trap_distance, T::zero());
        let points = square_lattice(trap_point, half_width, columns, rows);
        Self::assemble(points, columns, rows, half_width, trap_point)
    }

    /// Grid over an arbitrary point set (all on z = 0) around `trap_point`.
    pub fn with_points(trap_point: Vec3<T>, points: Vec<Vec3<T>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("grid has no points".into()));
        }
        if points.iter().any(|p| p.z != T::zero()) || trap_point.z != T::zero() {
            return Err(Error::InvalidParameter("grid points must lie on z = 0".into()));
        }
        let half_width = points
            .iter()
            .map(|p| (p.x - trap_point.x).abs().max((p.y - trap_point.y).abs()))
            .fold(T::zero(), T::max);
        let n = points.len();
        Self::assemble(points, n, 1, half_width, trap_point)
    }

    fn assemble(
        points: Vec<Vec3<T>>,
        columns: usize,
        rows: usize,
        half_width: T,
        trap_point: Vec3<T>,
    ) -> Result<Self> {
        if let Some(p) = points
            .iter()
            .find(|p| (**p - trap_point).norm() <= T::lit(GRID_TRAP_EPS))
        {
            return Err(Error::InvalidParameter(format!(
                "grid point {:?} coincides with the trap point; use an even resolution",
                p.to_f64()
            )));
        }
        Ok(Self {
            points,
            columns,
            rows,
            half_width,
            trap_point,
        })
    }

    pub fn points(&self) -> &[Vec3<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.columns, self.rows)
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }

    pub fn trap_point(&self) -> Vec3<T> {
        self.trap_point
    }

    /// Spacing between adjacent columns (x) and rows (y).
    pub fn cell_size(&self) -> (T, T) {
        let step = |n: usize| {
            if n > 1 {
                T::lit(2.0) * self.half_width / T::lit((n - 1) as f64)
            } else {
                T::zero()
            }
        };
        (step(self.columns), step(self.rows))
    }

    /// Same grid with its points reordered by `order` (a permutation).
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.points.len() {
            return Err(Error::ShapeMismatch {
                expected: self.points.len(),
                actual: order.len(),
            });
        }
        let mut seen = vec![false; order.len()];
        for &i in order {
            if i >= seen.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidParameter("order is not a permutation".into()));
            }
        }
        Ok(Self {
            points: order.iter().map(|&i| self.points[i]).collect(),
            ..self.clone()
        })
    }

    pub fn cast<U: Scalar>(&self) -> EvaluationGrid<U> {
        EvaluationGrid {
            points: self.points.iter().map(Vec3::cast).collect(),
            columns: self.columns,
            rows: self.rows,
            half_width: U::lit(self.half_width.value()),
            trap_point: self.trap_point.cast(),
        }
    }
}

fn lattice_coord<T: Scalar>(center: T, half_width: T, index: usize, n: usize) -> T {
    if n == 1 {
        center
    } else {
        center - half_width + T::lit(2.0) * half_width * T::lit(index as f64) / T::lit((n - 1) as f64)
    }
}

fn square_lattice<T: Scalar>(center: Vec3<T>, half_width: T, columns: usize, rows: usize) -> Vec<Vec3<T>> {
    let mut points = Vec::with_capacity(columns * rows);
    for j in 0..rows {
        let y = lattice_coord(center.y, half_width, j, rows);
        for i in 0..columns {
            let x = lattice_coord(center.x, half_width, i, columns);
            points.push(Vec3::new(x, y, center.z));
        }
    }
    points
}

/// Sampling plane for field dumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Plane {
    /// Horizontal plane at height `z`; axes are (x, y).
    Xy { z: f64 },
    /// Vertical plane at `x`; axes are (y, z).
    Yz { x: f64 },
}

/// Regular lattice on `plane` spanning `[u_min, u_max] × [v_min, v_max]`,
/// with `u` the fast axis. Unlike [`EvaluationGrid`] the trap point may be
/// sampled.
pub fn plane_points(
    plane: Plane,
    u_range: (f64, f64),
    v_range: (f64, f64),
    nu: usize,
    nv: usize,
) -> Result<Vec<Vec3<f64>>> {
    if nu == 0 || nv == 0 {
        return Err(Error::InvalidParameter(
            "plane resolution must be at least 1x1".into(),
        ));
    }
    let coord = |(lo, hi): (f64, f64), k: usize, n: usize| {
        if n == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * k as f64 / (n - 1) as f64
        }
    };
    let mut points = Vec::with_capacity(nu * nv);
    for b in 0..nv {
        let v = coord(v_range, b, nv);
        for a in 0..nu {
            let u = coord(u_range, a, nu);
            points.push(match plane {
                Plane::Xy { z } => Vec3::new(u, v, z),
                Plane::Yz { x } => Vec3::new(x, u, v),
            });
        }
    }
    Ok(points)
}

/// Forces (and the flux densities that oriented the robot) at a point set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForceField<T> {
    points: Vec<Vec3<T>>,
    forces: Vec<Vec3<T>>,
    flux: Vec<Vec3<T>>,
    near_field_points: usize,
}

impl<T: Scalar> ForceField<T> {
    /// Builds a field from explicit vectors, e.g. a synthetic reference field.
    pub fn from_parts(
        points: Vec<Vec3<T>>,
        forces: Vec<Vec3<T>>,
        flux: Option<Vec<Vec3<T>>>,
    ) -> Result<Self> {
        if forces.len() != points.len() {
            return Err(Error::ShapeMismatch {
                expected: points.len(),
                actual: forces.len(),
            });
        }
        if forces.iter().any(|f| !f.is_finite()) {
            return Err(Error::NonFinite("force vector".into()));
        }
        let flux = flux.unwrap_or_else(|| vec![Vec3::zero(); points.len()]);
        if flux.len() != points.len() {
            return Err(Error::ShapeMismatch {
                expected: points.len(),
                actual: flux.len(),
            });
        }
        Ok(Self {
            points,
            forces,
            flux,
            near_field_points: 0,
        })
    }

    pub fn points(&self) -> &[Vec3<T>] {
        &self.points
    }

    pub fn forces(&self) -> &[Vec3<T>] {
        &self.forces
    }

    pub fn flux(&self) -> &[Vec3<T>] {
        &self.flux
    }

    pub fn len(&self) -> usize {
        self.forces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forces.is_empty()
    }

    /// Points closer to some magnet than the dipole validity radius.
    pub fn near_field_points(&self) -> usize {
        self.near_field_points
    }

    /// `Σ‖F‖` over all points.
    pub fn total_magnitude(&self) -> T {
        self.forces.iter().fold(T::zero(), |acc, f| acc + f.norm())
    }

    /// Writes `x_mm,y_mm,z_mm,Fx_N,Fy_N,Fz_N,Bx_T,By_T,Bz_T`; forces and flux
    /// in exponent notation.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(FIELD_CSV_HEADER)?;
        for ((p, f), b) in self.points.iter().zip(&self.forces).zip(&self.flux) {
            let position = [p.x, p.y, p.z].map(|v| (v.value() * 1e3).to_string());
            let values = [f.x, f.y, f.z, b.x, b.y, b.z].map(|v| format!("{:e}", v.value()));
            w.write_record(position.iter().chain(&values))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub const FIELD_CSV_HEADER: [&str; 9] = [
    "x_mm", "y_mm", "z_mm", "Fx_N", "Fy_N", "Fz_N", "Bx_T", "By_T", "Bz_T",
];

fn count_near_field<T: Scalar>(points: &[Vec3<T>], array: &MagnetArray<T>) -> usize {
    points
        .iter()
        .filter(|p| {
            array
                .magnets()
                .iter()
                .any(|m| (**p - m.center()).norm() < m.validity_radius())
        })
        .count()
}

/// Evaluates [`force_total`] at every point, in order.
pub fn evaluate_points<T: Scalar>(
    array: &MagnetArray<T>,
    points: &[Vec3<T>],
    robot: &RobotMagnet<T>,
) -> Result<ForceField<T>> {
    let per_point: Vec<(Vec3<T>, Vec3<T>)> = points
        .par_iter()
        .map(|p| force_and_flux(p, array, robot))
        .collect::<Result<_>>()?;
    let near = count_near_field(points, array);
    if near > 0 {
        log::warn!(
            "{near} of {} evaluation points lie within 1.5 magnet diagonals of a source",
            points.len()
        );
    }
    let (forces, flux) = per_point.into_iter().unzip();
    Ok(ForceField {
        points: points.to_vec(),
        forces,
        flux,
        near_field_points: near,
    })
}

/// Force field of `array` over the grid; output order matches grid order.
pub fn evaluate_grid<T: Scalar>(
    array: &MagnetArray<T>,
    grid: &EvaluationGrid<T>,
    robot: &RobotMagnet<T>,
) -> Result<ForceField<T>> {
    evaluate_points(array, grid.points(), robot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_array;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    const MU0: f64 = 4e-7 * PI;

    fn unit_magnet(angle: f64) -> Magnet<f64> {
        Magnet::new(Vec3::zero(), 0.01, 1.0, angle).unwrap()
    }

    fn prototype() -> MagnetArray<f64> {
        build_array(2, 0.0508, 1.275, 0.0, Some(0.120))
            .unwrap()
            .with_angles(&[341.0, 19.0])
            .unwrap()
    }

    fn robot() -> RobotMagnet<f64> {
        RobotMagnet::cylinder(1.32, 1e-3, 2e-3).unwrap()
    }

    #[test]
    fn on_axis_flux() {
        let magnet = unit_magnet(0.0);
        let m = magnet.moment().norm();
        let d = 0.1;
        let b = flux_density_single(&Vec3::new(0.0, 0.0, d), &magnet).unwrap();
        assert_relative_eq!(b.z, MU0 * m / (2.0 * PI * d.powi(3)), max_relative = 1e-14);
        assert!(b.x.abs() < 1e-20 && b.y.abs() < 1e-20);
    }

    #[test]
    fn equatorial_flux() {
        let magnet = unit_magnet(0.0);
        let m = magnet.moment().norm();
        let d = 0.1;
        let b = flux_density_single(&Vec3::new(d, 0.0, 0.0), &magnet).unwrap();
        assert_relative_eq!(b.z, -MU0 * m / (4.0 * PI * d.powi(3)), max_relative = 1e-14);
        assert!(b.x.abs() < 1e-20 && b.y.abs() < 1e-20);
    }

    #[test]
    fn singular_points_are_errors() {
        let magnet = unit_magnet(0.0);
        assert!(matches!(
            flux_density_single(&Vec3::zero(), &magnet),
            Err(Error::Singularity { .. })
        ));
        assert!(matches!(
            force_single(&Vec3::zero(), &magnet, &Vec3::new(0.0, 0.0, 1.0)),
            Err(Error::Singularity { .. })
        ));
    }

    #[test]
    fn single_magnet_total_equals_single() {
        let magnet = Magnet::new(Vec3::new(0.0, 0.0, 0.02), 0.01, 1.0, 0.0).unwrap();
        let array = build_array(2, 0.01, 1.0, 0.0, Some(0.04)).unwrap();
        let p = Vec3::new(0.013, 0.07, 0.0);
        let total = flux_density_total(&p, &array).unwrap();
        let sum = array
            .magnets()
            .iter()
            .map(|m| flux_density_single(&p, m).unwrap())
            .fold(Vec3::zero(), |a, b| a + b);
        assert_eq!(total, sum);
        let only = flux_density_single(&p, &magnet).unwrap();
        assert_relative_eq!(only.z, flux_density_single(&p, &array.magnets()[0]).unwrap().z);
    }

    #[test]
    fn mirror_pair_cancels_transverse_flux_at_origin() {
        let array = build_array(2, 0.01, 1.0, 0.0, Some(0.05)).unwrap();
        let b = flux_density_total(&Vec3::zero(), &array).unwrap();
        assert_eq!(b.x, 0.0);
        assert!(f64::abs(b.y) <= 1e-15 * b.norm());
        assert!(b.z > 0.0);
    }

    #[test]
    fn prototype_flux_points_down_at_trap() {
        let b = flux_density_total(&Vec3::new(0.0, 0.089, 0.0), &prototype()).unwrap();
        assert!(b.z < 0.0);
        assert!(b.z.abs() > 5.0 * b.x.abs().max(b.y.abs()));
    }

    #[test]
    fn robot_moment_direction_only() {
        let r = RobotMagnet::new(1.32, 1.571e-9).unwrap();
        let p = Vec3::zero();
        let m = robot_moment_from_flux(Vec3::new(0.0, 0.0, -1.0), &r, &p).unwrap();
        // Br·V/μ0 = 1.32 · 1.571e-9 / (4π·1e-7)
        let expected = 1.32 * 1.571e-9 / MU0;
        assert_relative_eq!(expected, 1.650e-3, max_relative = 1e-3);
        assert_relative_eq!(m.z, -expected, max_relative = 1e-14);
        let scaled = robot_moment_from_flux(Vec3::new(0.0, 0.0, -10.0), &r, &p).unwrap();
        assert_relative_eq!(scaled.z, m.z, max_relative = 1e-15);
        assert!(matches!(
            robot_moment_from_flux(Vec3::zero(), &r, &p),
            Err(Error::DegenerateField { .. })
        ));
    }

    #[test]
    fn coaxial_dipoles_attract() {
        let d: f64 = 0.1;
        let zhat = Vec3::new(0.0, 0.0, 1.0);
        // target at +z·d from the source, both moments along +z
        let f = dipole_force(zhat * d, zhat, zhat);
        let magnitude = 3.0 * MU0 / (2.0 * PI * d.powi(4));
        assert_relative_eq!(f.z, -magnitude, max_relative = 1e-14);
        assert_relative_eq!(magnitude, 6.0e-3, max_relative = 1e-12);
    }

    #[test]
    fn orthogonal_dipoles_feel_no_force() {
        let f = dipole_force(
            Vec3::new(0.0, 0.0, 0.1),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        );
        assert_eq!(f, Vec3::zero());
    }

    #[test]
    fn inverse_fourth_power() {
        let m = Vec3::new(0.0, 0.3, 0.9);
        let t = Vec3::new(0.1, -0.5, 0.2);
        let r = Vec3::new(0.03, 0.05, -0.02);
        let ratio = dipole_force(r, m, t).norm() / dipole_force(r * 2.0, m, t).norm();
        assert!(f64::abs(ratio - 16.0) / 16.0 < 1e-9);
    }

    #[test]
    fn prototype_trap_center_has_small_in_plane_force() {
        let array = prototype();
        let center = force_total(&Vec3::new(0.0, 0.089, 0.0), &array, &robot()).unwrap();
        let edge = force_total(&Vec3::new(0.0, 0.079, 0.0), &array, &robot()).unwrap();
        let in_plane = |f: Vec3<f64>| f.x.hypot(f.y);
        assert!(in_plane(center) < 0.1 * in_plane(edge));
    }

    #[test]
    fn grid_layout_and_guard() {
        let grid = EvaluationGrid::new(0.089, 0.010, 20, 20).unwrap();
        assert_eq!(grid.len(), 400);
        assert_eq!(grid.points()[0], Vec3::new(-0.010, 0.079, 0.0));
        assert_relative_eq!(grid.points()[399].x, 0.010);
        assert_relative_eq!(grid.points()[399].y, 0.099);
        assert_eq!(grid.points()[1].y, grid.points()[0].y);
        assert!(EvaluationGrid::new(0.089, 0.010, 21, 21).is_err());
        assert!(EvaluationGrid::new(0.089, 0.010, 1, 1).is_err());
        assert!(EvaluationGrid::new(0.089, 0.0, 4, 4).is_err());
    }

    #[test]
    fn single_point_grid_matches_force_total() {
        let array = prototype();
        let p = Vec3::new(0.004, 0.085, 0.0);
        let grid = EvaluationGrid::with_points(Vec3::new(0.0, 0.089, 0.0), vec![p]).unwrap();
        let field = evaluate_grid(&array, &grid, &robot()).unwrap();
        assert_eq!(field.forces()[0], force_total(&p, &array, &robot()).unwrap());
    }

    #[test]
    fn grid_matches_pointwise_evaluation() {
        let array = build_array(4, 0.02, 1.3, 0.0, None).unwrap();
        let grid = EvaluationGrid::new(0.05, 0.01, 6, 4).unwrap();
        let field = evaluate_grid(&array, &grid, &robot()).unwrap();
        for (p, f) in grid.points().iter().zip(field.forces()) {
            assert_eq!(*f, force_total(p, &array, &robot()).unwrap());
        }
    }

    #[test]
    fn grid_error_names_point() {
        let array = build_array(2, 0.01, 1.0, 0.0, Some(0.04)).unwrap();
        let points = vec![Vec3::new(0.0, 0.0, 0.02)];
        match evaluate_points(&array, &points, &robot()) {
            Err(Error::Singularity { point }) => assert_eq!(point, points[0]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_export_schema() {
        let array = prototype();
        let grid = EvaluationGrid::new(0.089, 0.010, 2, 2).unwrap();
        let field = evaluate_grid(&array, &grid, &robot()).unwrap();
        let mut buf = Vec::new();
        field.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "x_mm,y_mm,z_mm,Fx_N,Fy_N,Fz_N,Bx_T,By_T,Bz_T"
        );
        assert_eq!(lines.clone().count(), 4);
        let first: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|s| s.parse().unwrap())
            .collect();
        assert_relative_eq!(first[0], -10.0, max_relative = 1e-12);
        assert_relative_eq!(first[1], 79.0, max_relative = 1e-12);
    }

    #[test]
    fn plane_sampling() {
        let pts = plane_points(Plane::Yz { x: 0.0 }, (0.0, 0.1), (-0.05, 0.05), 11, 3).unwrap();
        assert_eq!(pts.len(), 33);
        assert_eq!(pts[0], Vec3::new(0.0, 0.0, -0.05));
        assert_eq!(pts[32], Vec3::new(0.0, 0.1, 0.05));
    }
}
