//! Exhaustive angle search for two-magnet arrays.

use std::io::Write;

use serde::Serialize;

use super::gradient::Problem;
use super::restart::canonical_angles;
use crate::error::{Error, Result};
use crate::field::EvaluationGrid;
use crate::geometry::{MagnetArray, RobotMagnet};
use crate::objective::LossConfig;

/// Direction loss on the full `(α₁, α₂)` lattice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub resolution_deg: f64,
    pub steps_per_axis: usize,
    /// Lattice minimizer, reported as the 180°-rotated twin with
    /// `Σ cos α ≥ 0` like optimizer results.
    pub best_angles_deg: [f64; 2],
    pub best_loss: f64,
    /// Row-major in `α₁`; failed evaluations are NaN.
    pub surface: Vec<f64>,
}

impl OracleResult {
    pub fn evaluations(&self) -> usize {
        self.surface.len()
    }

    /// Loss at lattice indices `(i, j)`, i.e. angles `(i·res, j·res)`.
    pub fn loss_at(&self, i: usize, j: usize) -> f64 {
        self.surface[i * self.steps_per_axis + j]
    }

    /// Writes `alpha1_deg,alpha2_deg,loss`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["alpha1_deg", "alpha2_deg", "loss"])?;
        for i in 0..self.steps_per_axis {
            for j in 0..self.steps_per_axis {
                let a1 = i as f64 * self.resolution_deg;
                let a2 = j as f64 * self.resolution_deg;
                w.write_record([a1.to_string(), a2.to_string(), self.loss_at(i, j).to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluates the direction loss at every lattice point with spacing
/// `resolution_deg` (which must divide 360) and returns the minimum.
pub fn brute_force_2mag(
    array: &MagnetArray<f64>,
    grid: &EvaluationGrid<f64>,
    robot: &RobotMagnet<f64>,
    resolution_deg: f64,
) -> Result<OracleResult> {
    if array.len() != 2 {
        return Err(Error::MagnetCount {
            expected: 2,
            actual: array.len(),
        });
    }
    let steps = (360.0 / resolution_deg).round();
    if !(resolution_deg > 0.0) || steps < 1.0 || (steps * resolution_deg - 360.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "resolution {resolution_deg}° does not divide 360°"
        )));
    }
    let steps = steps as usize;
    let problem = Problem::new(array, grid, robot, LossConfig::direction_only())?;
    let mut surface = Vec::with_capacity(steps * steps);
    let mut best = (f64::INFINITY, [0.0, 0.0]);
    for i in 0..steps {
        let a1 = i as f64 * resolution_deg;
        for j in 0..steps {
            let a2 = j as f64 * resolution_deg;
            let loss = problem.loss(&[a1, a2]).map(|b| b.direction).unwrap_or(f64::NAN);
            if loss < best.0 {
                best = (loss, [a1, a2]);
            }
            surface.push(loss);
        }
    }
    if !best.0.is_finite() {
        return Err(Error::OptimizationFailed(
            "every lattice evaluation failed".into(),
        ));
    }
    let canonical = canonical_angles(&best.1);
    Ok(OracleResult {
        resolution_deg,
        steps_per_axis: steps,
        best_angles_deg: [canonical[0], canonical[1]],
        best_loss: best.0,
        surface,
    })
}
