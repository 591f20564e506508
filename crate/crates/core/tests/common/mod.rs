#![allow(dead_code)]

use cecme::estimator::EstimatorConfig;
use cecme::synth::{generate_scene, make_correspondences, NoiseSpec, SimConfig, SimMeasurements, SimScene};
use cecme::{Rotation, UnitBearing};

pub fn scene(m: usize, seed: u64) -> SimScene {
    generate_scene(&SimConfig {
        point_count: m,
        seed,
        ..SimConfig::default()
    })
    .unwrap()
}

pub fn measure(m: usize, sigma_px: f64, seed: u64) -> SimMeasurements {
    make_correspondences(&scene(m, seed), &NoiseSpec::iid(sigma_px), seed).unwrap()
}

/// Estimator settings for the synthetic protocol, with the degeneracy
/// fallback off.
pub fn synthetic_cfg() -> EstimatorConfig {
    EstimatorConfig {
        enable_degeneracy_fallback: false,
        ..EstimatorConfig::default()
    }
}

pub fn rotation_err(a: &Rotation, b: &Rotation) -> f64 {
    (a.matrix() - b.matrix()).norm_squared()
}

pub fn bearing_err(a: &UnitBearing, b: &UnitBearing) -> f64 {
    (a.vector() - b.vector()).norm_squared()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
