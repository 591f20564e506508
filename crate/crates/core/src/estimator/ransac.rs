//! Nine-point RANSAC prefilter scored by Sampson distance.

use nalgebra::Matrix3;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::design::{bias_eliminated_spectrum, build_design, essential_from_theta, estimate_noise_variance, Spectrum};
use super::EstimatorConfig;
use super::pipeline::choose_rotation;
use crate::geom::{decompose_essential, PoseHypothesis};
use crate::{Correspondence, CorrespondenceSet, Error, Result};

pub const SAMPLE_SIZE: usize = 9;
const CONFIDENCE: f64 = 0.999;
const MAX_REFITS: usize = 5;
const REFIT_BAND: f64 = 3.0;
const MIN_ITERATIONS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefilterResult {
    pub inlier_mask: Vec<bool>,
    pub rough_pose: PoseHypothesis,
    pub iterations: usize,
}

/// Smallest-eigenvector fit projected to singular values `(1, 1, 0)`.
pub(crate) fn fit_essential(set: &CorrespondenceSet) -> Result<Matrix3<f64>> {
    let d = build_design(set);
    let theta = Spectrum::of(&d.q)?.min_vector();
    project_essential(&essential_from_theta(&theta))
}

/// Bias-eliminated fit for consensus sets, where the noise level is estimable.
pub(crate) fn fit_essential_consistent(set: &CorrespondenceSet) -> Result<Matrix3<f64>> {
    let d = build_design(set);
    let sigma2 = estimate_noise_variance(&d)?;
    let theta = bias_eliminated_spectrum(&d, sigma2)?.min_vector();
    project_essential(&essential_from_theta(&theta))
}

pub(crate) fn project_essential(e: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let svd = e.svd(true, true);
    let u = svd.u.ok_or(Error::RankDeficient)?;
    let v_t = svd.v_t.ok_or(Error::RankDeficient)?;
    let mut s = svd.singular_values;
    // nalgebra sorts singular values in descending order.
    if !(s[1] > 1e-6 * s[0]) {
        return Err(Error::RankDeficient);
    }
    s[0] = 1.0;
    s[1] = 1.0;
    s[2] = 0.0;
    Ok(u * Matrix3::from_diagonal(&s) * v_t)
}

/// First-order distance to the epipolar geometry in normalized units.
///
/// Plain algebraic error shrinks wherever `E y` has a small image part, which
/// lets outliers through near the epipole.
pub fn sampson_distance(e: &Matrix3<f64>, c: &Correspondence) -> f64 {
    let y = c.y_h();
    let z = c.z_h();
    let ey = e * y;
    let etz = e.transpose() * z;
    let alg = z.dot(&ey);
    let grad2 = ey.x * ey.x + ey.y * ey.y + etz.x * etz.x + etz.y * etz.y;
    if grad2 > 0.0 {
        alg.abs() / grad2.sqrt()
    } else {
        f64::INFINITY
    }
}

fn inlier_mask_for(e: &Matrix3<f64>, set: &CorrespondenceSet, threshold: f64) -> Vec<bool> {
    set.iter().map(|c| sampson_distance(e, c) <= threshold).collect()
}

/// Returns the best consensus mask and a cheirality-selected pose refit on
/// its inliers. Deterministic for a fixed `cfg.ransac.seed`.
pub fn ransac_prefilter(set: &CorrespondenceSet, cfg: &EstimatorConfig) -> Result<PrefilterResult> {
    let m = set.len();
    if m < SAMPLE_SIZE {
        return Err(Error::TooFewPoints {
            needed: SAMPLE_SIZE,
            got: m,
        });
    }
    let threshold = cfg.ransac.inlier_threshold_normalized;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.ransac.seed);
    let mut best: Option<(Matrix3<f64>, usize)> = None;
    let mut budget = cfg.ransac.max_iterations;
    let mut best_raw = 0;
    let mut iterations = 0;
    while iterations < budget {
        iterations += 1;
        let idx = sample(&mut rng, m, SAMPLE_SIZE).into_vec();
        let Ok(e) = fit_essential(&set.select(&idx)) else {
            continue;
        };
        let raw = count_inliers(&e, set, threshold);
        // Local refits run on every new raw best; noisy minimal fits rarely
        // beat an already refined consensus by themselves.
        if raw <= best_raw {
            continue;
        }
        best_raw = raw;
        let (e, count) = local_refit(e, raw, set, threshold);
        if best.map_or(true, |(_, c)| count > c) {
            best = Some((e, count));
            let p_good = (count as f64 / m as f64).powi(SAMPLE_SIZE as i32);
            if p_good >= 1.0 {
                budget = iterations;
            } else if p_good > 0.0 {
                let needed = ((1.0 - CONFIDENCE).ln() / (1.0 - p_good).ln()).ceil();
                if needed.is_finite() && (needed as usize) < budget {
                    budget = (needed as usize).max(iterations).max(MIN_ITERATIONS.min(cfg.ransac.max_iterations));
                }
            }
        }
    }
    let (e, count) = best.unwrap_or((Matrix3::zeros(), 0));
    if count < SAMPLE_SIZE {
        return Err(Error::NoConsensus { best: count });
    }

    log::debug!("prefilter kept {count} of {m} after {iterations} samples");
    let inlier_mask = inlier_mask_for(&e, set, threshold);
    let inliers = set.subset(&inlier_mask);
    let rough_pose = choose_rotation(&decompose_essential(&e)?, &inliers)?;
    Ok(PrefilterResult {
        inlier_mask,
        rough_pose,
        iterations,
    })
}

/// Refits on a widened band around `e` while the consensus grows. A band as
/// tight as the scoring threshold selects noise toward the sampled model and
/// biases the refit.
fn local_refit(mut e: Matrix3<f64>, mut count: usize, set: &CorrespondenceSet, threshold: f64) -> (Matrix3<f64>, usize) {
    for _ in 0..MAX_REFITS {
        let band = set.subset(&inlier_mask_for(&e, set, REFIT_BAND * threshold));
        if band.len() < SAMPLE_SIZE {
            break;
        }
        let Some((refit, refit_count)) = [fit_essential_consistent(&band), fit_essential(&band)]
            .into_iter()
            .flatten()
            .map(|e| (e, count_inliers(&e, set, threshold)))
            .max_by_key(|(_, n)| *n)
        else {
            break;
        };
        if refit_count <= count {
            break;
        }
        e = refit;
        count = refit_count;
    }
    (e, count)
}

fn count_inliers(e: &Matrix3<f64>, set: &CorrespondenceSet, threshold: f64) -> usize {
    set.iter().filter(|c| sampson_distance(e, c) <= threshold).count()
}

