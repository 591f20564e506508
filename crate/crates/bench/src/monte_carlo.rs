//! Seeded Monte Carlo sweeps.
//!
//! Every sweep value fixes one scene; trial `i` draws fresh noise with seed
//! `base_seed ^ i`. Trials run in parallel and are reduced in index order,
//! so results do not depend on scheduling.

use std::time::Instant;

use cecme::crb::constrained_crb;
use cecme::estimator::pure_rotation_statistic;
use cecme::synth::{
    coplanarity_statistic, generate_scene, generate_scene_visible_under, make_correspondences, NoiseKind, NoiseSpec,
    SimConfig, SimScene,
};
use cecme::{EstimatorConfig, PoseSolver, Rotation, SolverRegistry, UnitBearing};
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Experiment, RunConfig};
use crate::error::{BenchError, Result};
use crate::metrics::{bearing_error_sq, median, mse_bias_metrics, rotation_error_sq};

/// One estimator run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub rotation: Rotation,
    pub bearing: UnitBearing,
    pub initial_rotation: Rotation,
    pub initial_bearing: UnitBearing,
    pub sigma2_hat: f64,
    pub degeneracy_ratio: f64,
    pub used_ransac_fallback: bool,
    pub rotation_error_frobenius_sq: f64,
    pub bearing_error_sq: f64,
    pub pure_rotation_statistic: f64,
    pub runtime_microseconds: u64,
}

/// Aggregates over the trials of one sweep value. Column order of CSV
/// reports follows the field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub sweep_value: f64,
    /// Trials that produced an estimate.
    pub trials: usize,
    pub failed_trials: usize,
    pub mse_rotation: f64,
    pub mse_bearing: f64,
    pub bias_rotation: f64,
    pub bias_bearing: f64,
    /// Same metrics for the first-step pose, before refinement.
    pub mse_rotation_initial: f64,
    pub mse_bearing_initial: f64,
    /// Absent when the Fisher information is singular.
    pub crb_rotation: Option<f64>,
    pub crb_bearing: Option<f64>,
    /// Median of `|σ̂² - σ²| / σ²`.
    pub sigma2_rel_error_median: f64,
    /// Mean of `((σ̂² - σ²) / σ²)²`.
    pub sigma2_rel_mse: f64,
    pub mean_degeneracy_ratio: f64,
    pub fallback_rate: f64,
    pub mean_pure_rotation_statistic: f64,
    /// Smallest eigenvalue of the homogeneous second moment of the scene.
    pub coplanarity: f64,
    /// Present only when the run records timing.
    pub mean_runtime_us: Option<f64>,
}

/// What one sweep value fixes for all of its trials.
#[derive(Debug, Clone)]
struct Setup {
    scene: SimScene,
    noise: NoiseSpec,
    estimator: EstimatorConfig,
}

fn config_error(e: cecme::Error) -> BenchError {
    BenchError::Config(e.to_string())
}

fn as_count(value: f64) -> usize {
    value as usize
}

fn translation_sweep_base(cfg: &RunConfig) -> Result<(SimScene, Vector3<f64>)> {
    let t = cfg.sim.translation();
    if t.norm() == 0.0 {
        return Err(BenchError::Config("translation_sweep needs a nonzero sim.translation".into()));
    }
    let dir = t.normalize();
    let translations: Vec<Vector3<f64>> = cfg.sweep_values.iter().map(|&v| dir * v).collect();
    let scene = generate_scene_visible_under(&cfg.sim, &translations).map_err(config_error)?;
    Ok((scene, dir))
}

fn setup_for(cfg: &RunConfig, value: f64, translation_base: Option<&(SimScene, Vector3<f64>)>) -> Result<Setup> {
    let mut sim: SimConfig = cfg.sim.clone();
    let mut estimator = cfg.estimator;
    let scene_of = |sim: &SimConfig| generate_scene(sim).map_err(config_error);
    let scene = match cfg.experiment {
        Experiment::ConsistencySweep => {
            sim.point_count = as_count(value);
            scene_of(&sim)?
        }
        Experiment::NoniidCheck => {
            sim.point_count = as_count(value);
            sim.noise.kind = NoiseKind::PerPointUniformSigma;
            scene_of(&sim)?
        }
        Experiment::TranslationSweep => {
            let (base, dir) = translation_base.expect("translation base scene");
            base.with_translation(dir * value)
        }
        Experiment::CoplanaritySweep => {
            sim.coplanar_squash = value;
            scene_of(&sim)?
        }
        Experiment::GnCountSweep => {
            estimator.gn_iterations = as_count(value);
            scene_of(&sim)?
        }
        Experiment::EigenvectorAblation => {
            estimator.initial_eigvec_rank = as_count(value);
            scene_of(&sim)?
        }
        Experiment::OutlierSweep => {
            sim.noise.outlier_rate = value;
            scene_of(&sim)?
        }
        Experiment::NoiseSweep => {
            sim.noise.kind = NoiseKind::IidGaussian;
            sim.noise.sigma_px = value;
            scene_of(&sim)?
        }
        Experiment::SingleEstimate => scene_of(&sim)?,
    };
    sim.noise.validate().map_err(config_error)?;
    estimator.validate().map_err(config_error)?;
    Ok(Setup {
        scene,
        noise: sim.noise,
        estimator,
    })
}

fn run_trial(setup: &Setup, solver: &dyn PoseSolver, seed: u64) -> Result<std::result::Result<TrialRecord, cecme::Error>> {
    let meas = make_correspondences(&setup.scene, &setup.noise, seed).map_err(|e| BenchError::Data(e.to_string()))?;
    let start = Instant::now();
    let outcome = solver.estimate(&meas.set, &setup.estimator);
    let runtime_microseconds = start.elapsed().as_micros() as u64;
    Ok(outcome.map(|est| TrialRecord {
        seed,
        rotation: est.rotation,
        bearing: est.bearing,
        initial_rotation: est.initial.rotation,
        initial_bearing: est.initial.bearing,
        sigma2_hat: est.sigma2_hat,
        degeneracy_ratio: est.degeneracy_ratio,
        used_ransac_fallback: est.used_ransac_fallback,
        rotation_error_frobenius_sq: rotation_error_sq(&est.rotation, &meas.truth.rotation),
        bearing_error_sq: bearing_error_sq(&est.bearing, &meas.truth.bearing),
        pure_rotation_statistic: pure_rotation_statistic(&est.rotation, &meas.set),
        runtime_microseconds,
    }))
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Runs all trials of one sweep value and aggregates them.
pub fn run_sweep_value(cfg: &RunConfig, value: f64) -> Result<(MetricSeries, Vec<TrialRecord>)> {
    let base = match cfg.experiment {
        Experiment::TranslationSweep => Some(translation_sweep_base(cfg)?),
        _ => None,
    };
    run_value(cfg, value, base.as_ref(), &resolve_solver(cfg)?)
}

fn resolve_solver(cfg: &RunConfig) -> Result<std::sync::Arc<dyn PoseSolver>> {
    SolverRegistry::with_builtins().get(&cfg.solver).ok_or_else(|| {
        BenchError::Config(format!(
            "unknown solver {:?}; available: {}",
            cfg.solver,
            SolverRegistry::with_builtins().names().collect::<Vec<_>>().join(", ")
        ))
    })
}

fn run_value(
    cfg: &RunConfig,
    value: f64,
    base: Option<&(SimScene, Vector3<f64>)>,
    solver: &std::sync::Arc<dyn PoseSolver>,
) -> Result<(MetricSeries, Vec<TrialRecord>)> {
    let setup = setup_for(cfg, value, base)?;
    let outcomes: Vec<_> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|i| run_trial(&setup, solver.as_ref(), cfg.base_seed ^ i))
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::with_capacity(outcomes.len());
    let mut last_error = None;
    for outcome in outcomes {
        match outcome {
            Ok(r) => records.push(r),
            Err(e) => last_error = Some(e),
        }
    }
    if records.is_empty() {
        return Err(BenchError::AllTrialsFailed {
            value,
            trials: cfg.trials,
            last: last_error.expect("at least one trial"),
        });
    }

    // Trials share the scene, so they share the truth; trial 0 stands for all.
    let truth = make_correspondences(&setup.scene, &setup.noise, cfg.base_seed)
        .map_err(|e| BenchError::Data(e.to_string()))?
        .truth;
    let crb = constrained_crb(&truth).ok().filter(|r| !r.fisher_singular);
    let target = (&truth.rotation, &truth.bearing);
    let finals: Vec<_> = records.iter().map(|r| (r.rotation, r.bearing)).collect();
    let initials: Vec<_> = records.iter().map(|r| (r.initial_rotation, r.initial_bearing)).collect();
    let fin = mse_bias_metrics(&finals, target).expect("nonempty");
    let init = mse_bias_metrics(&initials, target).expect("nonempty");
    let rel: Vec<f64> = records.iter().map(|r| (r.sigma2_hat - truth.sigma2) / truth.sigma2).collect();
    let abs_rel: Vec<f64> = rel.iter().map(|e| e.abs()).collect();

    let series = MetricSeries {
        sweep_value: value,
        trials: records.len(),
        failed_trials: cfg.trials - records.len(),
        mse_rotation: fin.mse_rotation,
        mse_bearing: fin.mse_bearing,
        bias_rotation: fin.bias_rotation,
        bias_bearing: fin.bias_bearing,
        mse_rotation_initial: init.mse_rotation,
        mse_bearing_initial: init.mse_bearing,
        crb_rotation: crb.as_ref().map(|r| r.crb_rotation),
        crb_bearing: crb.as_ref().map(|r| r.crb_translation),
        sigma2_rel_error_median: median(&abs_rel).expect("nonempty"),
        sigma2_rel_mse: mean(rel.iter().map(|e| e * e)),
        mean_degeneracy_ratio: mean(records.iter().map(|r| r.degeneracy_ratio)),
        fallback_rate: mean(records.iter().map(|r| f64::from(u8::from(r.used_ransac_fallback)))),
        mean_pure_rotation_statistic: mean(records.iter().map(|r| r.pure_rotation_statistic)),
        coplanarity: coplanarity_statistic(&setup.scene.points3d).unwrap_or(f64::NAN),
        mean_runtime_us: cfg
            .record_timing
            .then(|| mean(records.iter().map(|r| r.runtime_microseconds as f64))),
    };
    log::info!(
        "{} {value}: mse_R {:.3e} mse_t {:.3e} ({} failed)",
        cfg.experiment,
        series.mse_rotation,
        series.mse_bearing,
        series.failed_trials
    );
    Ok((series, records))
}

/// One [`MetricSeries`] per sweep value, in sweep order.
pub fn run_monte_carlo(cfg: &RunConfig) -> Result<Vec<MetricSeries>> {
    cfg.validate()?;
    let solver = resolve_solver(cfg)?;
    let base = match cfg.experiment {
        Experiment::TranslationSweep => Some(translation_sweep_base(cfg)?),
        _ => None,
    };
    cfg.effective_sweep()
        .into_iter()
        .map(|v| run_value(cfg, v, base.as_ref(), &solver).map(|(s, _)| s))
        .collect()
}

/// [`run_monte_carlo`] on a dedicated pool of `threads` workers.
pub fn run_monte_carlo_with_threads(cfg: &RunConfig, threads: usize) -> Result<Vec<MetricSeries>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| BenchError::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_monte_carlo(cfg))
}
