//! Run configuration read from a TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{GaitParams, MeeParams, Validate};
use crate::generator::{preferred_gait, GeneratorConfig, GeneratorError};
use crate::optimizer::{pws_grid, OptimizerConfig, SampleSpace};
use crate::surrogate::TrainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Speeds at which per-speed controls are optimized; each maps to the
/// cheapest unassisted gait at that speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaitSelection {
    pub speeds_kmh: Vec<f64>,
    /// Step lengths scanned per speed.
    pub scan_lengths: usize,
}

impl Default for GaitSelection {
    fn default() -> Self {
        Self {
            speeds_kmh: vec![2.0, 3.0, 4.0, 5.0],
            scan_lengths: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    /// `(alpha, beta)` pairs in preference order.
    pub candidates: Vec<(f64, f64)>,
    /// m/s
    pub v_real: f64,
    pub grid_lengths: usize,
    pub grid_freqs: usize,
    pub rollouts_per_point: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            candidates: vec![(1.0, 1.0), (1.5, 1.0), (2.0, 1.0)],
            v_real: 1.25,
            grid_lengths: 12,
            grid_freqs: 12,
            rollouts_per_point: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareConfig {
    pub sim: PathBuf,
    pub exp: PathBuf,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            sim: PathBuf::from("sim.csv"),
            exp: PathBuf::from("exp.csv"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LandscapeConfig {
    pub speed_kmh: f64,
    pub n_kappa: usize,
    pub n_delay: usize,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        Self {
            speed_kmh: 4.0,
            n_kappa: 43,
            n_delay: 51,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Rollouts in the surrogate dataset.
    pub n_samples: usize,
    /// Dataset read by `train-surrogate`; defaults to `<output_dir>/dataset.csv`.
    pub dataset: Option<PathBuf>,
    /// Checkpoint read by `optimize` and `landscape`; defaults to `<output_dir>/surrogate.json`.
    pub checkpoint: Option<PathBuf>,
    pub mee: MeeParams,
    pub space: SampleSpace,
    pub gaits: GaitSelection,
    pub generator: GeneratorConfig,
    pub surrogate: TrainConfig,
    pub optimizer: OptimizerConfig,
    pub calibration: CalibrationConfig,
    pub compare: CompareConfig,
    pub landscape: LandscapeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            n_samples: 20_000,
            dataset: None,
            checkpoint: None,
            mee: MeeParams::default(),
            space: SampleSpace::walking_band(crate::domain::PathologyKind::None),
            gaits: GaitSelection::default(),
            generator: GeneratorConfig::default(),
            surrogate: TrainConfig::desk(),
            optimizer: OptimizerConfig::default(),
            calibration: CalibrationConfig::default(),
            compare: CompareConfig::default(),
            landscape: LandscapeConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = |m: String| Err(ConfigError::Invalid(m));
        self.generator.check().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.mee.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.surrogate.check().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for (i, b) in self.space.bounds.iter().enumerate() {
            if !(b.hi > b.lo) || !b.lo.is_finite() || !b.hi.is_finite() {
                return inv(format!("space.bounds[{i}] needs finite lo < hi"));
            }
        }
        let o = &self.optimizer;
        if !(o.lambda1 >= 0.0 && o.lambda2 >= 0.0) {
            return inv("optimizer lambdas must be non-negative".into());
        }
        if o.starts == 0 || o.max_iters == 0 {
            return inv("optimizer.starts and optimizer.max_iters must be positive".into());
        }
        if !(o.kappa_bounds.hi > o.kappa_bounds.lo && o.delay_bounds.hi > o.delay_bounds.lo) {
            return inv("optimizer bounds need lo < hi".into());
        }
        if self.gaits.speeds_kmh.is_empty() || self.gaits.speeds_kmh.iter().any(|v| !(*v > 0.0)) {
            return inv("gaits.speeds_kmh must be a non-empty list of positive speeds".into());
        }
        if self.gaits.scan_lengths == 0 {
            return inv("gaits.scan_lengths must be positive".into());
        }
        let c = &self.calibration;
        if c.candidates.is_empty() || c.grid_lengths == 0 || c.grid_freqs == 0 || c.rollouts_per_point == 0 {
            return inv("calibration needs candidates, a non-empty grid and at least one rollout".into());
        }
        if !(c.v_real > 0.0) {
            return inv("calibration.v_real must be positive".into());
        }
        if self.landscape.n_kappa == 0 || self.landscape.n_delay == 0 || !(self.landscape.speed_kmh > 0.0) {
            return inv("landscape grid counts and speed must be positive".into());
        }
        Ok(())
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.dataset.clone().unwrap_or_else(|| self.output_dir.join("dataset.csv"))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.output_dir.join("surrogate.json"))
    }

    /// Preferred gait at every configured speed, on the noise-free generator.
    pub fn optimization_gaits(&self) -> Result<Vec<GaitParams>, GeneratorError> {
        let quiet = self.generator.noiseless();
        let mut speeds = self.gaits.speeds_kmh.clone();
        speeds.sort_by(f64::total_cmp);
        speeds
            .iter()
            .map(|kmh| preferred_gait(&quiet, &self.mee, kmh / 3.6, self.gaits.scan_lengths, 1, self.seed))
            .collect()
    }

    pub fn calibration_grid(&self) -> Vec<GaitParams> {
        pws_grid(self.calibration.grid_lengths, self.calibration.grid_freqs)
    }
}
