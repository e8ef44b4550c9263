//! Conformance of the analytic gradient against central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::EvaluationGrid;
use crate::geometry::{MagnetArray, RobotMagnet};
use crate::objective::LossConfig;

use twofloat::TwoFloat;

use super::gradient::{central_difference_gradient_in, Problem};

/// Components whose gradient magnitude is below this are not compared.
pub const GRADCHECK_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub n_magnets: usize,
    pub trials: usize,
    pub h_deg: f64,
    pub seed: u64,
    /// Largest `|g − g_fd| / max(|g|, |g_fd|)` over compared components.
    pub max_relative_error: f64,
    /// Angles where the largest error occurred.
    pub worst_angles_deg: Vec<f64>,
    pub worst_component: usize,
    pub compared: usize,
    pub skipped: usize,
}

/// Compares [`Problem::loss_and_gradient`] with central differences of the
/// plain loss at `trials` uniformly random angle vectors. The differences
/// are taken in double-double precision so the comparison measures the
/// gradient rather than f64 cancellation.
pub fn gradient_check(
    array: &MagnetArray<f64>,
    grid: &EvaluationGrid<f64>,
    robot: &RobotMagnet<f64>,
    cfg: &LossConfig<f64>,
    trials: usize,
    h_deg: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    if trials == 0 || !(h_deg > 0.0) {
        return Err(Error::InvalidParameter(
            "gradient check needs at least one trial and a positive step".into(),
        ));
    }
    let problem = Problem::new(array, grid, robot, *cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = array.len();
    let mut report = GradCheckReport {
        n_magnets: n,
        trials,
        h_deg,
        seed,
        max_relative_error: 0.0,
        worst_angles_deg: Vec::new(),
        worst_component: 0,
        compared: 0,
        skipped: 0,
    };
    for _ in 0..trials {
        let angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..360.0)).collect();
        let (_, analytic) = problem.loss_and_gradient(&angles)?;
        let numeric = central_difference_gradient_in::<TwoFloat>(&angles, array, grid, robot, cfg, h_deg)?;
        for (k, (a, f)) in analytic.iter().zip(&numeric).enumerate() {
            let scale = a.abs().max(f.abs());
            if scale < GRADCHECK_FLOOR {
                report.skipped += 1;
                continue;
            }
            report.compared += 1;
            let err = (a - f).abs() / scale;
            if err > report.max_relative_error || report.worst_angles_deg.is_empty() {
                report.max_relative_error = err;
                report.worst_angles_deg.clone_from(&angles);
                report.worst_component = k;
            }
        }
    }
    Ok(report)
}
