//! Run configuration in human units (mm, degrees) and its conversion to the
//! SI types used by the library.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use magtrap::field::EvaluationGrid;
use magtrap::geometry::{build_array, MagnetArray, RobotMagnet};
use magtrap::objective::LossConfig;
use magtrap::optimizer::{AdamConfig, RestartPolicy};

const MM: f64 = 1e-3;

/// Every knob of a run. Defaults reproduce the two-magnet prototype.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n_magnets: usize,
    pub edge_length_mm: f64,
    pub remanence_t: f64,
    pub extra_spacing_mm: f64,
    /// Center-to-center spacing; 0 selects the face diagonal plus extra spacing.
    pub pitch_mm: f64,
    pub trap_distance_mm: f64,
    pub grid_columns: usize,
    pub grid_rows: usize,
    pub half_width_mm: f64,
    pub robot_remanence_t: f64,
    pub robot_volume_mm3: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Fixed `Ŷ` [N]; 0 derives it by two-stage tuning when `lambda2 > 0`.
    pub target_force_n: f64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub restarts: usize,
    pub steps: usize,
    pub threshold: f64,
    pub threshold_decrement: f64,
    pub max_rounds: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let policy = RestartPolicy::default();
        let adam = AdamConfig::<f64>::default();
        Self {
            n_magnets: 2,
            edge_length_mm: 50.8,
            remanence_t: 1.275,
            extra_spacing_mm: 0.0,
            pitch_mm: 120.0,
            trap_distance_mm: 89.0,
            grid_columns: 20,
            grid_rows: 20,
            half_width_mm: 10.0,
            robot_remanence_t: 1.32,
            robot_volume_mm3: std::f64::consts::PI * 0.5 * 0.5 * 2.0,
            lambda1: 1.0,
            lambda2: 1.0,
            target_force_n: 0.0,
            gamma: 1.5,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            restarts: policy.restarts_per_round,
            steps: policy.steps,
            threshold: policy.accuracy_threshold,
            threshold_decrement: policy.threshold_decrement,
            max_rounds: policy.max_rounds,
            seed: policy.seed,
        }
    }
}

/// Command-line overrides; any flag given wins over the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Number of magnets, even [default: 2]
    #[arg(long)]
    pub n_magnets: Option<usize>,
    /// Cube edge length in mm [default: 50.8, the prototype cubes]
    #[arg(long)]
    pub edge_length_mm: Option<f64>,
    /// Magnet remanence in T [default: 1.275, N45 data-sheet median]
    #[arg(long)]
    pub remanence_t: Option<f64>,
    /// Extra gap added to the face-diagonal pitch in mm [default: 0]
    #[arg(long)]
    pub extra_spacing_mm: Option<f64>,
    /// Center-to-center pitch in mm, 0 for face diagonal [default: 120, the prototype]
    #[arg(long)]
    pub pitch_mm: Option<f64>,
    /// Trap distance from the array along +Y in mm [default: 89]
    #[arg(long)]
    pub trap_distance_mm: Option<f64>,
    /// Grid columns along X [default: 20]
    #[arg(long)]
    pub grid_columns: Option<usize>,
    /// Grid rows along Y [default: 20]
    #[arg(long)]
    pub grid_rows: Option<usize>,
    /// Half-width of the square trap area in mm [default: 10, a 20 mm × 20 mm area]
    #[arg(long)]
    pub half_width_mm: Option<f64>,
    /// Robot magnet remanence in T [default: 1.32, N45]
    #[arg(long)]
    pub robot_remanence_t: Option<f64>,
    /// Robot magnet volume in mm³ [default: 1.571, cylinder 1 mm × 2 mm]
    #[arg(long)]
    pub robot_volume_mm3: Option<f64>,
    /// Direction-loss weight λ₁ [default: 1]
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// Magnitude-loss weight λ₂; 0 runs a direction-only search [default: 1]
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Desired total force Ŷ in N; 0 tunes it from a direction-only run [default: 0]
    #[arg(long)]
    pub target_force_n: Option<f64>,
    /// Ŷ multiplier γ for tuning [default: 1.5]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Adam learning rate in rad [default: 0.05]
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Adam β₁ [default: 0.9]
    #[arg(long)]
    pub beta1: Option<f64>,
    /// Adam β₂ [default: 0.999]
    #[arg(long)]
    pub beta2: Option<f64>,
    /// Adam ε [default: 1e-8]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Random starts per round k [default: 5]
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Adam steps per start [default: 300]
    #[arg(long)]
    pub steps: Option<usize>,
    /// Accuracy that ends the search early [default: 0.9]
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Threshold reduction after a failed round [default: 0.1]
    #[arg(long)]
    pub threshold_decrement: Option<f64>,
    /// Maximum rounds c [default: 3]
    #[arg(long)]
    pub max_rounds: Option<usize>,
    /// RNG seed for the starting angles [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

macro_rules! apply {
    ($cfg:ident, $ov:ident, $($field:ident),*) => {
        $(if let Some(v) = $ov.$field { $cfg.$field = v; })*
    };
}

impl RunConfig {
    /// Reads a flat TOML file; unknown keys are rejected by name.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        let ov = overrides;
        apply!(
            cfg,
            ov,
            n_magnets,
            edge_length_mm,
            remanence_t,
            extra_spacing_mm,
            pitch_mm,
            trap_distance_mm,
            grid_columns,
            grid_rows,
            half_width_mm,
            robot_remanence_t,
            robot_volume_mm3,
            lambda1,
            lambda2,
            target_force_n,
            gamma,
            learning_rate,
            beta1,
            beta2,
            epsilon,
            restarts,
            steps,
            threshold,
            threshold_decrement,
            max_rounds,
            seed
        );
        Ok(cfg)
    }

    pub fn pitch(&self) -> Option<f64> {
        (self.pitch_mm > 0.0).then_some(self.pitch_mm * MM)
    }

    pub fn array(&self) -> Result<MagnetArray<f64>> {
        self.array_with(self.n_magnets)
    }

    pub fn array_with(&self, n: usize) -> Result<MagnetArray<f64>> {
        if n == 0 {
            bail!("the magnet array is empty (n_magnets = 0)");
        }
        Ok(build_array(
            n,
            self.edge_length_mm * MM,
            self.remanence_t,
            self.extra_spacing_mm * MM,
            self.pitch(),
        )?)
    }

    pub fn grid(&self) -> Result<EvaluationGrid<f64>> {
        Ok(EvaluationGrid::new(
            self.trap_distance_mm * MM,
            self.half_width_mm * MM,
            self.grid_columns,
            self.grid_rows,
        )?)
    }

    pub fn robot(&self) -> Result<RobotMagnet<f64>> {
        Ok(RobotMagnet::new(
            self.robot_remanence_t,
            self.robot_volume_mm3 * MM * MM * MM,
        )?)
    }

    /// Two-stage tuning runs when the magnitude term is on and `Ŷ` is unset.
    pub fn tunes(&self) -> bool {
        self.lambda2 > 0.0 && self.target_force_n == 0.0
    }

    /// Loss weights for a single-stage run.
    pub fn loss(&self) -> Result<LossConfig<f64>> {
        if self.lambda2 == 0.0 {
            Ok(LossConfig::new(self.lambda1, 0.0, 0.0)?)
        } else {
            Ok(LossConfig::new(self.lambda1, self.lambda2, self.target_force_n)?)
        }
    }

    pub fn adam(&self) -> Result<AdamConfig<f64>> {
        let adam = AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        };
        adam.validate()?;
        Ok(adam)
    }

    pub fn policy(&self) -> Result<RestartPolicy> {
        let policy = RestartPolicy {
            restarts_per_round: self.restarts,
            steps: self.steps,
            accuracy_threshold: self.threshold,
            threshold_decrement: self.threshold_decrement,
            max_rounds: self.max_rounds,
            seed: self.seed,
        };
        policy.validate()?;
        Ok(policy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = toml::from_str::<RunConfig>("n_magnets = 4\nmagnet_cnt = 3\n").unwrap_err();
        assert!(err.to_string().contains("magnet_cnt"), "{err}");
    }

    #[test]
    fn integers_accepted_for_float_keys() {
        let cfg: RunConfig = toml::from_str("pitch_mm = 100\ntrap_distance_mm = 70").unwrap();
        assert_eq!(cfg.pitch_mm, 100.0);
        assert_eq!(cfg.trap_distance_mm, 70.0);
    }

    #[test]
    fn flags_win_over_file() {
        let ov = Overrides {
            seed: Some(7),
            lambda2: Some(0.0),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(None, &ov).unwrap();
        assert_eq!(cfg.seed, 7);
        assert!(!cfg.tunes());
        assert_eq!(cfg.loss().unwrap(), LossConfig::direction_only());
    }

    #[test]
    fn zero_magnets_rejected() {
        let cfg = RunConfig {
            n_magnets: 0,
            ..Default::default()
        };
        assert!(cfg.array().unwrap_err().to_string().contains("empty"));
    }
}
