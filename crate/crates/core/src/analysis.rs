//! Characterization of optimized traps and distance sweeps.

use std::collections::VecDeque;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{evaluate_points, flux_density_total, plane_points, EvaluationGrid, ForceField, Plane};
use crate::geometry::{build_array, MagnetArray, RobotMagnet};
use crate::objective::LossConfig;
use crate::optimizer::{
    multi_restart_problem, tune_force_target_problem, AdamConfig, OptimizationReport, Problem, RestartPolicy,
};
use crate::scalar::{normalize_degrees, Scalar};
use crate::vec3::Vec3;

/// Points within this fraction above the minimum in-plane force count as
/// "lowest force" when locating the trap center.
pub const TRAP_TIE_BAND: f64 = 0.05;

#[inline]
fn in_plane<T: Scalar>(f: &Vec3<T>) -> T {
    f.x.hypot(f.y)
}

/// Mean position of the points whose in-plane force is within
/// [`TRAP_TIE_BAND`] of the minimum.
pub fn trap_center<T: Scalar>(field: &ForceField<T>) -> Result<[T; 2]> {
    if field.is_empty() {
        return Err(Error::InvalidParameter("empty force field".into()));
    }
    let magnitudes: Vec<T> = field.forces().iter().map(in_plane).collect();
    let min = magnitudes.iter().copied().fold(T::infinity(), T::min);
    let cutoff = min * T::lit(1.0 + TRAP_TIE_BAND);
    let (mut sx, mut sy, mut count) = (T::zero(), T::zero(), 0usize);
    for (p, &m) in field.points().iter().zip(&magnitudes) {
        if m <= cutoff {
            sx = sx + p.x;
            sy = sy + p.y;
            count += 1;
        }
    }
    let n = T::lit(count as f64);
    Ok([sx / n, sy / n])
}

/// Mean `‖F‖` over the points within `radius` of `center` (in-plane distance).
pub fn avg_force_in_radius<T: Scalar>(field: &ForceField<T>, center: [T; 2], radius: T) -> Result<T> {
    if !(radius > T::zero()) {
        return Err(Error::InvalidParameter("radius must be positive".into()));
    }
    let (sum, count) = field
        .points()
        .iter()
        .zip(field.forces())
        .filter(|(p, _)| (p.x - center[0]).hypot(p.y - center[1]) <= radius)
        .fold((T::zero(), 0usize), |(s, c), (_, f)| (s + f.norm(), c + 1));
    if count == 0 {
        return Err(Error::EmptyRadius {
            radius: radius.value(),
        });
    }
    Ok(sum / T::lit(count as f64))
}

/// Sampling of the analysis plane around a trap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrapMapOptions {
    /// Half-width of the square sampled around the trap [m].
    pub half_width: f64,
    /// Samples per axis.
    pub resolution: usize,
}

impl Default for TrapMapOptions {
    fn default() -> Self {
        Self {
            half_width: 0.010,
            resolution: 81,
        }
    }
}

/// Force field on a square lattice centered on the trap (row-major, x fast).
#[derive(Debug, Clone, PartialEq)]
pub struct TrapMap {
    field: ForceField<f64>,
    resolution: usize,
    cell: f64,
    trap_point: Vec3<f64>,
}

/// Extents of the connected low-force region around the trap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AspectRatio {
    /// Major over minor extent, always ≥ 1.
    pub ratio: f64,
    pub extent_x: f64,
    pub extent_y: f64,
    /// The region reaches the edge of the sampled area.
    pub truncated: bool,
    /// Every sample is below the threshold, so the ratio carries no shape
    /// information.
    pub fills_area: bool,
    pub region_points: usize,
}

impl TrapMap {
    pub fn sample(
        array: &MagnetArray<f64>,
        robot: &RobotMagnet<f64>,
        trap_distance: f64,
        options: &TrapMapOptions,
    ) -> Result<Self> {
        if options.resolution < 2 || !(options.half_width > 0.0) {
            return Err(Error::InvalidParameter(
                "trap map needs resolution ≥ 2 and a positive half-width".into(),
            ));
        }
        let w = options.half_width;
        let points = plane_points(
            Plane::Xy { z: 0.0 },
            (-w, w),
            (trap_distance - w, trap_distance + w),
            options.resolution,
            options.resolution,
        )?;
        let field = evaluate_points(array, &points, robot)?;
        Self::from_field(field, options.resolution, Vec3::new(0.0, trap_distance, 0.0))
    }

    /// Wraps a field already sampled on a square `resolution²` lattice.
    pub fn from_field(field: ForceField<f64>, resolution: usize, trap_point: Vec3<f64>) -> Result<Self> {
        if resolution < 2 || field.len() != resolution * resolution {
            return Err(Error::ShapeMismatch {
                expected: resolution * resolution,
                actual: field.len(),
            });
        }
        let cell = field.points()[1].x - field.points()[0].x;
        Ok(Self {
            field,
            resolution,
            cell,
            trap_point,
        })
    }

    pub fn field(&self) -> &ForceField<f64> {
        &self.field
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn trap_point(&self) -> Vec3<f64> {
        self.trap_point
    }

    pub fn trap_center(&self) -> Result<[f64; 2]> {
        trap_center(&self.field)
    }

    /// Average `‖F‖` within `radius` of the target trap point.
    pub fn avg_force(&self, radius: f64) -> Result<f64> {
        avg_force_in_radius(&self.field, [self.trap_point.x, self.trap_point.y], radius)
    }

    /// Flood-fills the region with in-plane force below `threshold`, starting
    /// from the weakest sample, and measures its axis-aligned extents.
    ///
    /// Extents end where the force crosses the threshold between samples, so
    /// the ratio varies continuously with the field; a region reaching the
    /// sampled edge is cut there and flagged as truncated.
    pub fn aspect_ratio(&self, threshold: f64) -> Result<AspectRatio> {
        if !(threshold > 0.0) {
            return Err(Error::InvalidParameter("force threshold must be positive".into()));
        }
        let n = self.resolution;
        let magnitudes: Vec<f64> = self.field.forces().iter().map(in_plane).collect();
        let seed = magnitudes
            .iter()
            .enumerate()
            .fold(0, |best, (i, &m)| if m < magnitudes[best] { i } else { best });
        if !(magnitudes[seed] < threshold) {
            return Err(Error::EmptyRegion { threshold });
        }
        let mut inside = vec![false; n * n];
        let mut queue = VecDeque::from([seed]);
        inside[seed] = true;
        let (mut imin, mut imax, mut jmin, mut jmax) = (n, 0, n, 0);
        let mut count = 0;
        while let Some(k) = queue.pop_front() {
            let (i, j) = (k % n, k / n);
            imin = imin.min(i);
            imax = imax.max(i);
            jmin = jmin.min(j);
            jmax = jmax.max(j);
            count += 1;
            let neighbors = [
                (i > 0).then(|| k - 1),
                (i + 1 < n).then(|| k + 1),
                (j > 0).then(|| k - n),
                (j + 1 < n).then(|| k + n),
            ];
            for nb in neighbors.into_iter().flatten() {
                if !inside[nb] && magnitudes[nb] < threshold {
                    inside[nb] = true;
                    queue.push_back(nb);
                }
            }
        }
        // Sub-cell extents: on each side, the threshold crossing between the
        // outermost region cell and its outside neighbor, linearly interpolated.
        let overhang = |edge: &dyn Fn(usize) -> Option<(usize, usize)>| -> f64 {
            (0..n * n)
                .filter(|&k| inside[k])
                .filter_map(edge)
                .map(|(k, nb)| {
                    let (m_in, m_out) = (magnitudes[k], magnitudes[nb]);
                    ((threshold - m_in) / (m_out - m_in)).clamp(0.0, 1.0) * self.cell
                })
                .fold(0.0, f64::max)
        };
        let left = overhang(&|k| (k % n == imin && imin > 0).then(|| (k, k - 1)));
        let right = overhang(&|k| (k % n == imax && imax + 1 < n).then(|| (k, k + 1)));
        let low = overhang(&|k| (k / n == jmin && jmin > 0).then(|| (k, k - n)));
        let high = overhang(&|k| (k / n == jmax && jmax + 1 < n).then(|| (k, k + n)));
        let extent_x = (imax - imin) as f64 * self.cell + left + right;
        let extent_y = (jmax - jmin) as f64 * self.cell + low + high;
        Ok(AspectRatio {
            ratio: extent_x.max(extent_y) / extent_x.min(extent_y),
            extent_x,
            extent_y,
            truncated: imin == 0 || jmin == 0 || imax == n - 1 || jmax == n - 1,
            fills_area: count == n * n,
            region_points: count,
        })
    }
}

/// Aspect ratio of the low-force region of `array` around `(0, d, 0)`.
pub fn trap_aspect_ratio(
    array: &MagnetArray<f64>,
    robot: &RobotMagnet<f64>,
    trap_distance: f64,
    threshold: f64,
    options: &TrapMapOptions,
) -> Result<AspectRatio> {
    TrapMap::sample(array, robot, trap_distance, options)?.aspect_ratio(threshold)
}

/// First sign change of `B_z` along `(0, y, 0)` between `y_min` and `y_max`,
/// refined by bisection to 1e-7 m.
pub fn bz_zero_crossing<T: Scalar>(array: &MagnetArray<T>, y_min: T, y_max: T) -> Result<T> {
    let no_change = || Error::NoSignChange {
        y_min: y_min.value(),
        y_max: y_max.value(),
    };
    if !(y_max > y_min) {
        return Err(Error::InvalidParameter("y range must be increasing".into()));
    }
    let bz = |y: T| flux_density_total(&Vec3::new(T::zero(), y, T::zero()), array).map(|b| b.z);
    let samples = 2000;
    let step = (y_max - y_min) / T::lit(samples as f64);
    let mut lo = y_min;
    let mut f_lo = bz(lo)?;
    for k in 1..=samples {
        let hi = if k == samples {
            y_max
        } else {
            y_min + step * T::lit(k as f64)
        };
        let f_hi = bz(hi)?;
        if f_lo == T::zero() {
            return Ok(lo);
        }
        if f_lo * f_hi <= T::zero() {
            let (mut a, mut b, mut fa) = (lo, hi, f_lo);
            while b - a > T::lit(1e-7) {
                let mid = (a + b) / T::lit(2.0);
                let fm = bz(mid)?;
                if fm == T::zero() {
                    return Ok(mid);
                }
                if fa * fm < T::zero() {
                    b = mid;
                } else {
                    a = mid;
                    fa = fm;
                }
            }
            return Ok((a + b) / T::lit(2.0));
        }
        lo = hi;
        f_lo = f_hi;
    }
    Err(no_change())
}

/// Everything a distance sweep needs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub counts: Vec<usize>,
    /// Trap distances [m], processed in the given order.
    pub distances: Vec<f64>,
    pub edge_length: f64,
    pub remanence: f64,
    pub extra_spacing: f64,
    pub pitch_override: Option<f64>,
    pub robot: RobotMagnet<f64>,
    /// Optimization grid half-width [m] and resolution.
    pub grid_half_width: f64,
    pub grid_resolution: (usize, usize),
    pub loss: LossConfig<f64>,
    /// Run two-stage force-target tuning instead of a single search.
    pub tune: bool,
    pub gamma: f64,
    pub policy: RestartPolicy,
    pub adam: AdamConfig<f64>,
    /// Seed each distance with the previous solution.
    pub continuation: bool,
    pub map: TrapMapOptions,
    /// Radius for the average force column [m].
    pub force_radius: f64,
    /// Force threshold for the aspect-ratio region [N].
    pub aspect_threshold: f64,
    /// Centered moving-average window for the smoothed aspect ratio.
    pub smoothing_window: usize,
}

/// One optimized trap of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub distance: f64,
    pub n_magnets: usize,
    /// Unwrapped along the sweep so each magnet traces a continuous curve.
    pub angles_deg: Vec<f64>,
    pub loss: f64,
    pub direction_loss: f64,
    pub accuracy: f64,
    pub avg_force: Option<f64>,
    pub aspect_ratio: Option<f64>,
    pub aspect_ratio_smoothed: Option<f64>,
    pub truncated: Option<bool>,
    /// The whole sampled area is below the aspect threshold.
    pub fills_area: Option<bool>,
    pub seconds: f64,
    pub restarts: usize,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Rows for one magnet count, in distance order.
    pub fn for_count(&self, n: usize) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.n_magnets == n).collect()
    }

    /// Copy with wall-clock columns zeroed.
    pub fn without_timing(&self) -> Self {
        Self {
            rows: self
                .rows
                .iter()
                .map(|r| SweepRow {
                    seconds: 0.0,
                    ..r.clone()
                })
                .collect(),
        }
    }

    /// CSV with one `alpha_k_deg` column per magnet of the largest array.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let max_n = self.rows.iter().map(|r| r.n_magnets).max().unwrap_or(0);
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["distance_mm".to_string(), "n_magnets".to_string()];
        header.extend((1..=max_n).map(|k| format!("alpha_{k}_deg")));
        header.extend(
            [
                "loss",
                "accuracy",
                "avg_force_N",
                "aspect_ratio",
                "aspect_ratio_smoothed",
                "truncated_flag",
                "seconds",
            ]
            .map(String::from),
        );
        w.write_record(&header)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let mut rec = vec![(r.distance * 1e3).to_string(), r.n_magnets.to_string()];
            rec.extend((0..max_n).map(|k| r.angles_deg.get(k).map(|a| a.to_string()).unwrap_or_default()));
            let failed = r.failure.is_some();
            rec.push(if failed { String::new() } else { r.loss.to_string() });
            rec.push(if failed {
                String::new()
            } else {
                r.accuracy.to_string()
            });
            rec.push(opt(r.avg_force));
            rec.push(opt(r.aspect_ratio));
            rec.push(opt(r.aspect_ratio_smoothed));
            rec.push(r.truncated.map(|t| (t as u8).to_string()).unwrap_or_default());
            rec.push(r.seconds.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn circular_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = normalize_degrees(x - y);
            d.min(360.0 - d)
        })
        .sum()
}

/// Picks between `angles` and its 180°-rotated twin (same forces) the one
/// nearest `previous`, then unwraps each angle to within 180° of it.
pub fn continue_branch(angles: &[f64], previous: Option<&[f64]>) -> Vec<f64> {
    let Some(prev) = previous else {
        return angles.to_vec();
    };
    let flipped: Vec<f64> = angles.iter().map(|a| normalize_degrees(a + 180.0)).collect();
    let pick = if circular_gap(&flipped, prev) < circular_gap(angles, prev) {
        flipped
    } else {
        angles.to_vec()
    };
    pick.iter()
        .zip(prev)
        .map(|(a, p)| a + 360.0 * ((p - a) / 360.0).round())
        .collect()
}

/// Centered moving average over the available values; `None` entries are
/// skipped and the window shrinks at the ends.
pub fn moving_average(values: &[Option<f64>], window: usize) -> Vec<Option<f64>> {
    let half = window.max(1) / 2;
    (0..values.len())
        .map(|i| {
            values[i]?;
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(values.len() - 1);
            let window: Vec<f64> = values[lo..=hi].iter().flatten().copied().collect();
            Some(window.iter().sum::<f64>() / window.len() as f64)
        })
        .collect()
}

fn optimize_point(
    cfg: &SweepConfig,
    problem: &Problem<f64>,
    warm: Option<&[f64]>,
) -> Result<OptimizationReport> {
    if cfg.tune {
        tune_force_target_problem(problem, &cfg.policy, &cfg.adam, cfg.gamma, warm).map(|t| t.stage2)
    } else {
        multi_restart_problem(problem, &cfg.policy, &cfg.adam, warm)
    }
}

fn sweep_count(cfg: &SweepConfig, n: usize) -> Result<Vec<SweepRow>> {
    let template = build_array(
        n,
        cfg.edge_length,
        cfg.remanence,
        cfg.extra_spacing,
        cfg.pitch_override,
    )?;
    let mut previous: Option<Vec<f64>> = None;
    let mut rows = Vec::with_capacity(cfg.distances.len());
    for &distance in &cfg.distances {
        let started = Instant::now();
        let outcome = (|| {
            let grid = EvaluationGrid::new(
                distance,
                cfg.grid_half_width,
                cfg.grid_resolution.0,
                cfg.grid_resolution.1,
            )?;
            let problem = Problem::new(&template, &grid, &cfg.robot, cfg.loss)?;
            let warm = if cfg.continuation {
                previous.as_deref()
            } else {
                None
            };
            let report = optimize_point(cfg, &problem, warm)?;
            let angles = continue_branch(&report.best_angles_deg, previous.as_deref());
            let solved = template.with_angles(&angles)?;
            let map = TrapMap::sample(&solved, &cfg.robot, distance, &cfg.map)?;
            Ok::<_, Error>((report, angles, map))
        })();
        let row = match outcome {
            Ok((report, angles, map)) => {
                let aspect = map.aspect_ratio(cfg.aspect_threshold);
                if let Err(e) = &aspect {
                    log::debug!("aspect ratio at {distance} m, {n} magnets: {e}");
                }
                previous = Some(angles.clone());
                SweepRow {
                    distance,
                    n_magnets: n,
                    angles_deg: angles,
                    loss: report.best_loss,
                    direction_loss: report.best_direction_loss,
                    accuracy: report.best_accuracy,
                    avg_force: map.avg_force(cfg.force_radius).ok(),
                    aspect_ratio: aspect.as_ref().ok().map(|a| a.ratio),
                    aspect_ratio_smoothed: None,
                    truncated: aspect.as_ref().ok().map(|a| a.truncated),
                    fills_area: aspect.as_ref().ok().map(|a| a.fills_area),
                    seconds: started.elapsed().as_secs_f64(),
                    restarts: report.restarts_executed,
                    failure: None,
                }
            }
            Err(e) => {
                log::warn!("sweep point {distance} m with {n} magnets failed: {e}");
                SweepRow {
                    distance,
                    n_magnets: n,
                    angles_deg: Vec::new(),
                    loss: f64::NAN,
                    direction_loss: f64::NAN,
                    accuracy: f64::NAN,
                    avg_force: None,
                    aspect_ratio: None,
                    aspect_ratio_smoothed: None,
                    truncated: None,
                    fills_area: None,
                    seconds: started.elapsed().as_secs_f64(),
                    restarts: 0,
                    failure: Some(e.to_string()),
                }
            }
        };
        rows.push(row);
    }
    let smoothed = moving_average(
        &rows.iter().map(|r| r.aspect_ratio).collect::<Vec<_>>(),
        cfg.smoothing_window,
    );
    for (row, s) in rows.iter_mut().zip(smoothed) {
        row.aspect_ratio_smoothed = s;
    }
    Ok(rows)
}

/// Optimizes a trap at every `(count, distance)` pair and characterizes it.
///
/// Magnet counts run in parallel; within a count, distances run in order so
/// each can start from its predecessor's solution. Per-point failures are
/// recorded in the row and the sweep continues.
pub fn distance_sweep(cfg: &SweepConfig) -> Result<SweepTable> {
    if cfg.counts.is_empty() || cfg.distances.is_empty() {
        return Err(Error::InvalidParameter(
            "sweep needs at least one count and one distance".into(),
        ));
    }
    cfg.policy.validate()?;
    cfg.loss.validate()?;
    let per_count: Vec<Vec<SweepRow>> = cfg
        .counts
        .par_iter()
        .map(|&n| sweep_count(cfg, n))
        .collect::<Result<_>>()?;
    Ok(SweepTable {
        rows: per_count.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lattice(res: usize, w: f64, yc: f64) -> Vec<Vec3<f64>> {
        plane_points(Plane::Xy { z: 0.0 }, (-w, w), (yc - w, yc + w), res, res).unwrap()
    }

    fn synthetic(points: &[Vec3<f64>], f: impl Fn(&Vec3<f64>) -> Vec3<f64>) -> ForceField<f64> {
        ForceField::from_parts(points.to_vec(), points.iter().map(f).collect(), None).unwrap()
    }

    #[test]
    fn ideal_trap_center_is_exact() {
        let trap = Vec3::new(0.0, 0.05, 0.0);
        let pts = lattice(21, 0.01, 0.05);
        let field = synthetic(&pts, |p| trap - *p);
        let c = trap_center(&field).unwrap();
        assert!(c[0].abs() < 1e-15);
        assert_relative_eq!(c[1], 0.05, max_relative = 1e-14);
    }

    #[test]
    fn uniform_field_center_is_centroid() {
        let pts = lattice(8, 0.01, 0.05);
        let field = synthetic(&pts, |_| Vec3::new(1.0, 2.0, 0.0));
        let c = trap_center(&field).unwrap();
        assert!(c[0].abs() < 1e-15);
        assert_relative_eq!(c[1], 0.05, max_relative = 1e-12);
    }

    #[test]
    fn avg_force_single_point_and_empty() {
        let pts = lattice(5, 0.01, 0.05);
        let field = synthetic(&pts, |p| Vec3::new(p.x, 0.0, 0.0) + Vec3::new(0.0, 0.0, 1.0));
        let v = avg_force_in_radius(&field, [0.0, 0.05], 1e-4).unwrap();
        assert_eq!(v, 1.0);
        assert!(matches!(
            avg_force_in_radius(&field, [1.0, 1.0], 1e-3),
            Err(Error::EmptyRadius { .. })
        ));
    }

    #[test]
    fn radial_field_aspect_ratio_is_one() {
        let trap = Vec3::new(0.0, 0.05, 0.0);
        let pts = lattice(41, 0.01, 0.05);
        let field = synthetic(&pts, |p| trap - *p);
        let map = TrapMap::from_field(field, 41, trap).unwrap();
        let a = map.aspect_ratio(0.004).unwrap();
        assert_relative_eq!(a.ratio, 1.0, max_relative = 1e-12);
        assert_relative_eq!(a.extent_x, 0.008, max_relative = 1e-9);
        assert!(!a.truncated);
        let all = map.aspect_ratio(1.0).unwrap();
        assert!(all.truncated && all.fills_area);
        assert!(!a.fills_area);
        assert!(matches!(map.aspect_ratio(-1.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn elliptic_field_aspect_ratio() {
        let trap = Vec3::new(0.0, 0.05, 0.0);
        let pts = lattice(81, 0.01, 0.05);
        // weak along x: region stretches along x by a factor of 3
        let field = synthetic(&pts, |p| Vec3::new(-(p.x) / 3.0, trap.y - p.y, 0.0));
        let map = TrapMap::from_field(field, 81, trap).unwrap();
        let a = map.aspect_ratio(0.002).unwrap();
        assert!(a.extent_x > a.extent_y);
        assert!((a.ratio - 3.0).abs() < 0.25, "{}", a.ratio);
    }

    #[test]
    fn single_magnet_equator_has_no_crossing() {
        let array = build_array(2, 0.01, 1.0, 0.0, Some(0.02)).unwrap();
        assert!(matches!(
            bz_zero_crossing(&array, 0.03, 0.2),
            Err(Error::NoSignChange { .. })
        ));
    }

    #[test]
    fn moving_average_window() {
        let v = vec![Some(1.0), Some(2.0), None, Some(4.0), Some(5.0)];
        let s = moving_average(&v, 3);
        assert_eq!(s[0], Some(1.5));
        assert_eq!(s[1], Some(1.5));
        assert_eq!(s[2], None);
        assert_eq!(s[3], Some(4.5));
        assert_eq!(s[4], Some(4.5));
    }

    #[test]
    fn branch_continuation() {
        assert_eq!(continue_branch(&[341.0, 19.0], None), vec![341.0, 19.0]);
        assert_eq!(
            continue_branch(&[1.0, 19.0], Some(&[355.0, 20.0])),
            vec![361.0, 19.0]
        );
        assert_eq!(
            continue_branch(&[160.0, 200.0], Some(&[341.0, 19.0])),
            vec![340.0, 20.0]
        );
    }

    #[test]
    fn csv_header_columns() {
        let table = SweepTable {
            rows: vec![SweepRow {
                distance: 0.089,
                n_magnets: 2,
                angles_deg: vec![341.0, 19.0],
                loss: 0.38,
                direction_loss: 0.38,
                accuracy: 0.9,
                avg_force: Some(1e-3),
                aspect_ratio: Some(1.5),
                aspect_ratio_smoothed: Some(1.5),
                truncated: Some(false),
                fills_area: Some(false),
                seconds: 0.1,
                restarts: 1,
                failure: None,
            }],
        };
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "distance_mm,n_magnets,alpha_1_deg,alpha_2_deg,loss,accuracy,avg_force_N,aspect_ratio,aspect_ratio_smoothed,truncated_flag,seconds"
        );
        assert!(text.lines().nth(1).unwrap().starts_with("89,2,341,19,"));
    }
}
