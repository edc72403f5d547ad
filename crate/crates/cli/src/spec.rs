//! Experiment specifications and the TOML config file.

use std::path::Path;

use anyhow::{bail, Context, Result};
use fda_core::channel::Scatterer;
use fda_core::config::SystemConfig;
use fda_core::Complex64;
use serde::{Deserialize, Serialize};

/// The six experiments, in CLI spelling.
pub const EXPERIMENTS: [&str; 6] = [
    "beampattern",
    "capacity",
    "sensing-tradeoff",
    "isl-sweep",
    "range-error-sweep",
    "two-target",
];

/// Point scatterer as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScattererSpec {
    pub angle_deg: f64,
    /// Target range (one-way distance), m.
    pub distance_m: f64,
    #[serde(default = "one")]
    pub magnitude: f64,
    #[serde(default)]
    pub phase_deg: f64,
}

fn one() -> f64 {
    1.0
}

impl ScattererSpec {
    pub fn new(angle_deg: f64, distance_m: f64) -> Self {
        Self { angle_deg, distance_m, magnitude: 1.0, phase_deg: 0.0 }
    }

    pub fn to_target(&self) -> fda_core::Result<Scatterer> {
        Scatterer::target(
            self.angle_deg.to_radians(),
            self.distance_m,
            Complex64::from_polar(self.magnitude, self.phase_deg.to_radians()),
        )
    }
}

/// Sensing scene: targets and an optional noise level (absent means noiseless).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    /// Noise variance per subcarrier, dB relative to unit symbol power.
    #[serde(default)]
    pub noise_db: Option<f64>,
    #[serde(default)]
    pub scatterer: Vec<ScattererSpec>,
}

impl SceneSpec {
    pub fn noise_variance(&self) -> f64 {
        self.noise_db.map_or(0.0, |db| 10f64.powf(db / 10.0))
    }
}

/// Contents of a `--config` file: an optional `[system]` table and a scene.
#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub system: Option<SystemConfig>,
    #[serde(default)]
    pub noise_db: Option<f64>,
    #[serde(default)]
    pub scatterer: Vec<ScattererSpec>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// The scene, when the file defines any targets.
    pub fn scene(&self) -> Option<SceneSpec> {
        if self.scatterer.is_empty() && self.noise_db.is_none() {
            return None;
        }
        Some(SceneSpec { noise_db: self.noise_db, scatterer: self.scatterer.clone() })
    }
}

/// Everything needed to reproduce one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub experiment: String,
    pub config: SystemConfig,
    pub antennas: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub theta_err_deg: Vec<f64>,
    /// Angle axis: receive angles for the beam pattern, transmit/receive angle
    /// for the capacity sweep.
    pub angles_deg: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub scene: Option<SceneSpec>,
}

impl ExperimentSpec {
    /// Paper-scale defaults for `experiment`.
    pub fn defaults(experiment: &str) -> Result<Self> {
        let theta_err = vec![-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0];
        let (antennas, snr_db, theta_err_deg, angles_deg, trials): (Vec<usize>, Vec<f64>, Vec<f64>, Vec<f64>, usize) =
            match experiment {
                "beampattern" => (vec![3], vec![10.0], vec![0.0], grid(-90.0, 90.0, 0.5), 64),
                // Trials are derived from the symbol budget when left at 0.
                "capacity" => (vec![2, 4, 8, 16], vec![10.0], vec![0.0], vec![0.0], 0),
                "sensing-tradeoff" => (vec![1, 2, 4, 8, 16], vec![10.0], vec![0.0], vec![0.0], 1),
                "isl-sweep" => (vec![2, 4, 8, 16], vec![20.0], theta_err, vec![0.0], 50),
                "range-error-sweep" => (vec![2, 4, 8, 16], vec![10.0], theta_err, vec![0.0], 1),
                "two-target" => (vec![2], vec![10.0], vec![0.0], vec![0.0], 1),
                other => bail!("unknown experiment `{other}` (expected one of {})", EXPERIMENTS.join(", ")),
            };
        Ok(Self {
            experiment: experiment.to_string(),
            config: SystemConfig::default(),
            antennas,
            snr_db,
            theta_err_deg,
            angles_deg,
            trials,
            seed: 1,
            scene: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !EXPERIMENTS.contains(&self.experiment.as_str()) {
            bail!("unknown experiment `{}`", self.experiment);
        }
        if self.antennas.is_empty() || self.snr_db.is_empty() || self.theta_err_deg.is_empty() || self.angles_deg.is_empty() {
            bail!("sweep axes must be nonempty");
        }
        if self.antennas.contains(&0) {
            bail!("antenna counts must be >= 1");
        }
        if self.trials == 0 && self.experiment != "capacity" {
            bail!("trial count must be >= 1");
        }
        if let Some(scene) = &self.scene {
            for s in &scene.scatterer {
                s.to_target()?;
            }
        }
        self.config.validate()?;
        Ok(())
    }
}

/// `start, start + step, ..` through `end`, computed from integer steps.
pub fn grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step).round() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

/// Largest `K' <= K` that splits into `M` even blocks.
pub fn subcarriers_for(antennas: usize, subcarriers: usize) -> usize {
    subcarriers / (2 * antennas) * (2 * antennas)
}

/// `base` resized for `antennas`; the CP length in samples is kept.
pub fn system_config_for(base: &SystemConfig, antennas: usize) -> SystemConfig {
    SystemConfig { antennas, subcarriers: subcarriers_for(antennas, base.subcarriers), ..base.clone() }
}
