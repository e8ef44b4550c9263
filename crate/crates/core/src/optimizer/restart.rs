//! Random-restart driver with accuracy-threshold stopping and two-stage
//! force-target tuning.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::adam::{adam_run, AdamConfig};
use super::gradient::Problem;
use crate::error::{Error, Result};
use crate::field::EvaluationGrid;
use crate::geometry::{MagnetArray, RobotMagnet};
use crate::objective::{LossBreakdown, LossConfig};
use crate::scalar::{normalize_degrees, Scalar};

/// How many random starts to try and when to stop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartPolicy {
    /// Random starts per round (`k`).
    pub restarts_per_round: usize,
    /// Adam iterations per start.
    pub steps: usize,
    /// Initial accuracy a restart must exceed to stop the search.
    pub accuracy_threshold: f64,
    /// Absolute amount subtracted from the threshold after a failed round.
    pub threshold_decrement: f64,
    /// Maximum number of rounds (`c`).
    pub max_rounds: usize,
    pub seed: u64,
}

impl Default for RestartPolicy {
    fn default() -> Self {
        Self {
            restarts_per_round: 5,
            steps: 300,
            accuracy_threshold: 0.9,
            threshold_decrement: 0.1,
            max_rounds: 3,
            seed: 0,
        }
    }
}

impl RestartPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.restarts_per_round == 0 || self.steps == 0 || self.max_rounds == 0 {
            return Err(Error::InvalidParameter(
                "restarts per round, steps and rounds must all be at least 1".into(),
            ));
        }
        if !(self.accuracy_threshold > 0.0 && self.accuracy_threshold <= 1.0) {
            return Err(Error::InvalidParameter(
                "accuracy threshold must lie in (0, 1]".into(),
            ));
        }
        if !(self.threshold_decrement >= 0.0) {
            return Err(Error::InvalidParameter(
                "threshold decrement must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Threshold in force during each round.
    pub fn thresholds(&self) -> Vec<f64> {
        (0..self.max_rounds)
            .map(|r| self.accuracy_threshold - r as f64 * self.threshold_decrement)
            .collect()
    }
}

/// One Adam descent from one starting point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartOutcome {
    pub index: usize,
    pub round: usize,
    pub threshold: f64,
    /// True when the start came from a caller-supplied guess instead of the RNG.
    pub warm_start: bool,
    pub initial_angles_deg: Vec<f64>,
    /// Lowest-loss iterate of the descent; Adam's fixed step keeps the last
    /// iterate bouncing around sharp minima.
    pub final_angles_deg: Vec<f64>,
    pub best_step: usize,
    pub initial_loss: Option<f64>,
    pub final_loss: Option<f64>,
    pub final_direction_loss: Option<f64>,
    pub final_accuracy: Option<f64>,
    pub history: Vec<f64>,
    pub failure: Option<String>,
}

impl RestartOutcome {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }
}

/// Best solution across all restarts plus the full search record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationReport {
    /// Best angles on `[0, 360)`, in the representative whose net moment
    /// points along +Z.
    pub best_angles_deg: Vec<f64>,
    pub best_loss: f64,
    pub best_direction_loss: f64,
    pub best_magnitude_loss: f64,
    pub best_accuracy: f64,
    /// `Σ‖F‖` over the grid at the best angles [N].
    pub best_total_force: f64,
    pub best_restart: usize,
    /// Whether some restart exceeded the threshold of its round.
    pub threshold_met: bool,
    pub restarts_executed: usize,
    pub rounds_executed: usize,
    pub seed: u64,
    pub loss_config: LossConfig<f64>,
    pub adam: AdamConfig<f64>,
    pub policy: RestartPolicy,
    pub restarts: Vec<RestartOutcome>,
    /// Wall-clock time; excluded from the determinism contract.
    pub elapsed_seconds: f64,
}

impl OptimizationReport {
    /// Copy with the wall-clock field zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        Self {
            elapsed_seconds: 0.0,
            ..self.clone()
        }
    }
}

/// Representative of an angle set on `[0, 360)`.
///
/// Rotating every magnet by 180° reverses every moment, the flux density and
/// hence the aligned robot moment, leaving all forces unchanged; of the two
/// equivalent sets the one with `Σ cos α ≥ 0` (net moment toward +Z) is
/// returned.
pub fn canonical_angles(angles_deg: &[f64]) -> Vec<f64> {
    let net_z: f64 = angles_deg.iter().map(|a| a.to_radians().cos()).sum();
    let shift = if net_z < 0.0 { 180.0 } else { 0.0 };
    angles_deg.iter().map(|a| normalize_degrees(a + shift)).collect()
}

/// The z-reflected configuration `{α_k at z_k} → {360 − α at −z}`.
pub fn mirror_angles(angles_deg: &[f64]) -> Vec<f64> {
    angles_deg
        .iter()
        .rev()
        .map(|a| normalize_degrees(360.0 - a))
        .collect()
}

fn to_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.value()).collect()
}

/// Lowest-loss angles [deg], loss history, breakdown there and its step.
type Descent<T> = (Vec<f64>, Vec<f64>, LossBreakdown<T>, usize);

/// Runs one Adam descent in radians starting from `initial_deg` and returns
/// its lowest-loss iterate, the loss history and the step it was reached at.
fn descend<T: Scalar>(
    problem: &Problem<T>,
    initial_deg: &[f64],
    adam: &AdamConfig<f64>,
    steps: usize,
) -> Result<Descent<T>> {
    let per_rad = T::lit(180.0) / T::PI();
    let initial_rad: Vec<T> = initial_deg.iter().map(|a| T::lit(a.to_radians())).collect();
    let cfg = AdamConfig {
        learning_rate: T::lit(adam.learning_rate),
        beta1: T::lit(adam.beta1),
        beta2: T::lit(adam.beta2),
        epsilon: T::lit(adam.epsilon),
    };
    let run = adam_run(
        &initial_rad,
        |rad| {
            let deg: Vec<T> = rad.iter().map(|&r| r * per_rad).collect();
            let (loss, grad) = problem.loss_and_gradient(&deg)?;
            Ok((loss.total, grad.into_iter().map(|g| g * per_rad).collect()))
        },
        cfg,
        steps,
    )?;
    let best_deg: Vec<T> = run.best_params.iter().map(|&r| r * per_rad).collect();
    let breakdown = problem.loss(&best_deg)?;
    Ok((to_f64(&best_deg), to_f64(&run.history), breakdown, run.best_step))
}

/// Multi-start search on a prepared problem.
///
/// Each restart draws its starting angles uniformly on `[0°, 360°)` from one
/// seeded stream, whether or not it is used; `warm_start`, when given,
/// replaces the first draw.
pub fn multi_restart_problem<T: Scalar>(
    problem: &Problem<T>,
    policy: &RestartPolicy,
    adam: &AdamConfig<f64>,
    warm_start: Option<&[f64]>,
) -> Result<OptimizationReport> {
    policy.validate()?;
    adam.validate()?;
    let n = problem.magnet_count();
    if let Some(w) = warm_start {
        if w.len() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                actual: w.len(),
            });
        }
    }
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let mut restarts = Vec::new();
    let mut best: Option<(usize, Vec<f64>, LossBreakdown<T>)> = None;
    let mut threshold_met = false;
    let mut rounds_executed = 0;

    'rounds: for (round, threshold) in policy.thresholds().into_iter().enumerate() {
        rounds_executed = round + 1;
        for _ in 0..policy.restarts_per_round {
            let index = restarts.len();
            let drawn: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..360.0)).collect();
            let (initial, warm) = match warm_start {
                Some(w) if index == 0 => (w.to_vec(), true),
                _ => (drawn, false),
            };
            let initial_loss = problem.loss(&initial.iter().map(|&a| T::lit(a)).collect::<Vec<_>>());
            let mut outcome = RestartOutcome {
                index,
                round,
                threshold,
                warm_start: warm,
                initial_angles_deg: initial.clone(),
                final_angles_deg: Vec::new(),
                best_step: 0,
                initial_loss: initial_loss.as_ref().ok().map(|b| b.total.value()),
                final_loss: None,
                final_direction_loss: None,
                final_accuracy: None,
                history: Vec::new(),
                failure: None,
            };
            match descend(problem, &initial, adam, policy.steps) {
                Ok((final_deg, history, breakdown, best_step)) => {
                    let accuracy = breakdown.accuracy.value();
                    outcome.final_angles_deg = final_deg.clone();
                    outcome.final_loss = Some(breakdown.total.value());
                    outcome.final_direction_loss = Some(breakdown.direction.value());
                    outcome.final_accuracy = Some(accuracy);
                    outcome.history = history;
                    outcome.best_step = best_step;
                    let better = best.as_ref().is_none_or(|(_, _, b)| breakdown.total < b.total);
                    if better {
                        best = Some((index, final_deg, breakdown));
                    }
                    restarts.push(outcome);
                    if accuracy > threshold {
                        threshold_met = true;
                        break 'rounds;
                    }
                }
                Err(e) => {
                    log::debug!("restart {index} failed: {e}");
                    outcome.failure = Some(e.to_string());
                    restarts.push(outcome);
                }
            }
        }
    }

    let Some((best_restart, best_angles, b)) = best else {
        return Err(Error::OptimizationFailed(format!(
            "all {} restarts failed; first error: {}",
            restarts.len(),
            restarts
                .first()
                .and_then(|r| r.failure.clone())
                .unwrap_or_default()
        )));
    };
    let cfg = problem.config();
    Ok(OptimizationReport {
        best_angles_deg: canonical_angles(&best_angles),
        best_loss: b.total.value(),
        best_direction_loss: b.direction.value(),
        best_magnitude_loss: b.magnitude.value(),
        best_accuracy: b.accuracy.value(),
        best_total_force: b.total_force.value(),
        best_restart,
        threshold_met,
        restarts_executed: restarts.len(),
        rounds_executed,
        seed: policy.seed,
        loss_config: cfg.cast(),
        adam: *adam,
        policy: policy.clone(),
        restarts,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Multi-start minimization of the composite loss over the array angles.
pub fn multi_restart<T: Scalar>(
    array: &MagnetArray<T>,
    grid: &EvaluationGrid<T>,
    robot: &RobotMagnet<T>,
    cfg: &LossConfig<T>,
    policy: &RestartPolicy,
    adam: &AdamConfig<f64>,
) -> Result<OptimizationReport> {
    let problem = Problem::new(array, grid, robot, *cfg)?;
    multi_restart_problem(&problem, policy, adam, None)
}

/// Both stages of force-target tuning.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneReport {
    pub gamma: f64,
    /// `Ŷ = γ·Σ‖F‖` of the stage-one solution [N].
    pub target_force: f64,
    pub stage1: OptimizationReport,
    pub stage2: OptimizationReport,
}

impl TuneReport {
    pub fn without_timing(&self) -> Self {
        Self {
            stage1: self.stage1.without_timing(),
            stage2: self.stage2.without_timing(),
            ..self.clone()
        }
    }
}

/// Direction-only search, then a second search with `λ₁ = λ₂ = 1` and
/// `Ŷ = γ` times the stage-one total force.
pub fn tune_force_target_problem<T: Scalar>(
    problem: &Problem<T>,
    policy: &RestartPolicy,
    adam: &AdamConfig<f64>,
    gamma: f64,
    warm_start: Option<&[f64]>,
) -> Result<TuneReport> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let stage1_problem = problem.with_config(LossConfig::direction_only())?;
    let stage1 = multi_restart_problem(&stage1_problem, policy, adam, warm_start)?;
    let target_force = gamma * stage1.best_total_force;
    let stage2_problem = problem.with_config(LossConfig::new(T::one(), T::one(), T::lit(target_force))?)?;
    let stage2 = multi_restart_problem(&stage2_problem, policy, adam, warm_start)?;
    Ok(TuneReport {
        gamma,
        target_force,
        stage1,
        stage2,
    })
}

pub fn tune_force_target<T: Scalar>(
    array: &MagnetArray<T>,
    grid: &EvaluationGrid<T>,
    robot: &RobotMagnet<T>,
    policy: &RestartPolicy,
    adam: &AdamConfig<f64>,
    gamma: f64,
) -> Result<TuneReport> {
    let problem = Problem::new(array, grid, robot, LossConfig::direction_only())?;
    tune_force_target_problem(&problem, policy, adam, gamma, None)
}
