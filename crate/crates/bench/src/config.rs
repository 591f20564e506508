//! Run configuration, read from TOML.
//!
//! ```toml
//! experiment = "consistency_sweep"
//! sweep_values = [100, 1000, 10000]
//! trials = 200
//! base_seed = 1
//! output_format = "csv"
//!
//! [sim]
//! point_count = 1000
//! seed = 0
//! [sim.noise]
//! kind = "iid_gaussian"
//! sigma_px = 1.0
//!
//! [estimator]
//! gn_iterations = 1
//! ```
//!
//! Every table and key is optional. Missing `sim` keys take the synthetic
//! scene defaults; missing `estimator` keys take [`synthetic_estimator`].

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cecme::synth::SimConfig;
use cecme::EstimatorConfig;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Sweep value: point count.
    ConsistencySweep,
    /// Sweep value: translation length in meters, scene held fixed.
    TranslationSweep,
    /// Sweep value: `coplanar_squash`.
    CoplanaritySweep,
    /// Sweep value: Gauss-Newton iteration count.
    GnCountSweep,
    /// Sweep value: rank of the seeding eigenvector.
    EigenvectorAblation,
    /// Sweep value: outlier rate.
    OutlierSweep,
    /// Sweep value: point count, under per-point noise levels.
    NoniidCheck,
    /// Sweep value: i.i.d. noise level in pixels.
    NoiseSweep,
    /// No sweep; one series at the `sim` template.
    SingleEstimate,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Self::ConsistencySweep,
        Self::TranslationSweep,
        Self::CoplanaritySweep,
        Self::GnCountSweep,
        Self::EigenvectorAblation,
        Self::OutlierSweep,
        Self::NoniidCheck,
        Self::NoiseSweep,
        Self::SingleEstimate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::ConsistencySweep => "consistency_sweep",
            Self::TranslationSweep => "translation_sweep",
            Self::CoplanaritySweep => "coplanarity_sweep",
            Self::GnCountSweep => "gn_count_sweep",
            Self::EigenvectorAblation => "eigenvector_ablation",
            Self::OutlierSweep => "outlier_sweep",
            Self::NoniidCheck => "noniid_check",
            Self::NoiseSweep => "noise_sweep",
            Self::SingleEstimate => "single_estimate",
        }
    }

    pub fn is_sweep(self) -> bool {
        self != Self::SingleEstimate
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| BenchError::Config(format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(BenchError::Config(format!("unknown format {s:?} (csv or json)"))),
        }
    }
}

/// Estimator settings for synthetic runs: library defaults with the
/// degeneracy fallback off.
pub fn synthetic_estimator() -> EstimatorConfig {
    EstimatorConfig {
        enable_degeneracy_fallback: false,
        ..EstimatorConfig::default()
    }
}

fn default_trials() -> usize {
    100
}

fn default_solver() -> String {
    "cecme".into()
}

fn default_experiment() -> Experiment {
    Experiment::SingleEstimate
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_experiment")]
    pub experiment: Experiment,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub sweep_values: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "synthetic_estimator")]
    pub estimator: EstimatorConfig,
    /// Name of a solver in the built-in registry.
    #[serde(default = "default_solver")]
    pub solver: String,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub output_format: OutputFormat,
    /// Wall-clock timings make reports differ between runs, so they are
    /// only recorded on request.
    #[serde(default)]
    pub record_timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: default_experiment(),
            sim: SimConfig::default(),
            sweep_values: Vec::new(),
            trials: default_trials(),
            estimator: synthetic_estimator(),
            solver: default_solver(),
            base_seed: 0,
            output_path: None,
            output_format: OutputFormat::Csv,
            record_timing: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.experiment.is_sweep() && self.sweep_values.is_empty() {
            return bad(format!("{} needs sweep_values", self.experiment));
        }
        if let Some(v) = self.sweep_values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return bad(format!("sweep value {v} must be finite and nonnegative"));
        }
        let integral = matches!(
            self.experiment,
            Experiment::ConsistencySweep
                | Experiment::NoniidCheck
                | Experiment::GnCountSweep
                | Experiment::EigenvectorAblation
        );
        if integral {
            if let Some(v) = self.sweep_values.iter().find(|v| v.fract() != 0.0) {
                return bad(format!("{} takes integer sweep values, got {v}", self.experiment));
            }
        }
        self.sim.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        self.estimator.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(())
    }

    /// Sweep values the run iterates over; `single_estimate` has one
    /// placeholder value.
    pub fn effective_sweep(&self) -> Vec<f64> {
        if self.experiment.is_sweep() {
            self.sweep_values.clone()
        } else {
            vec![0.0]
        }
    }
}
