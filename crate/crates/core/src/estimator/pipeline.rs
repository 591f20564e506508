use serde::{Deserialize, Serialize};

use super::design::{
    bias_eliminated_spectrum, build_design, epipolar_cost, essential_from_theta,
    estimate_noise_variance,
};
use super::depth::{k_closed_form, ml_objective, ml_residual};
use super::ransac::{ransac_prefilter, PrefilterResult};
use super::refine::{gn_refine, GnOutcome};
use super::EstimatorConfig;
use crate::geom::{cheirality_votes, decompose_essential, select_by_cheirality, PoseHypothesis, Rotation, UnitBearing};
use crate::{CorrespondenceSet, Error, Result};

/// Fewest correspondences for which `Q` can be invertible.
pub const MIN_POINTS: usize = 9;
const REGATE_PASSES: usize = 2;

/// Output of the consistent first step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialPose {
    pub rotation: Rotation,
    pub bearing: UnitBearing,
    pub sigma2: f64,
    /// `c2 / c1`, the epipolar costs of the second-smallest and smallest
    /// eigenvectors of `Q^BE`.
    pub ratio: f64,
    pub used_fallback: bool,
    pub cost_min: f64,
    pub cost_second: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub prefilter_used: bool,
    /// Correspondences whose closed-form depth ratio is `≤ 0` at the final pose.
    pub nonpositive_depths: usize,
    pub kernel_rejected: usize,
    pub dropped_rows: usize,
    pub singular_normal_equations: bool,
    pub epipolar_cost_min: f64,
    pub epipolar_cost_second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate {
    pub rotation: Rotation,
    pub bearing: UnitBearing,
    /// Noise variance in normalized units².
    pub sigma2_hat: f64,
    pub degeneracy_ratio: f64,
    pub used_ransac_fallback: bool,
    pub inlier_mask: Vec<bool>,
    /// ML objective at the returned pose over the inliers.
    pub objective_value: f64,
    pub gn_steps_run: usize,
    /// First-step pose before refinement.
    pub initial: PoseHypothesis,
    pub initial_objective_value: f64,
    pub diagnostics: Diagnostics,
}

impl PoseEstimate {
    /// `σ̂²` in pixels² for focal length `focal`.
    pub fn sigma2_pixels(&self, focal: f64) -> f64 {
        self.sigma2_hat * focal * focal
    }
}

fn require_points(set: &CorrespondenceSet) -> Result<()> {
    if set.len() < MIN_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_POINTS,
            got: set.len(),
        });
    }
    Ok(())
}

/// Bias-eliminated first step: variance estimate, `Q^BE` spectrum, pose
/// recovery, and RANSAC fallback when `c2/c1` signals degeneracy.
pub fn consistent_initial_pose(set: &CorrespondenceSet, cfg: &EstimatorConfig) -> Result<InitialPose> {
    initial_pose_with(set, cfg, None)
}

pub(crate) fn initial_pose_with(
    set: &CorrespondenceSet,
    cfg: &EstimatorConfig,
    prefilter: Option<&PrefilterResult>,
) -> Result<InitialPose> {
    require_points(set)?;
    let design = build_design(set);
    let sigma2 = estimate_noise_variance(&design)?;
    let spectrum = bias_eliminated_spectrum(&design, sigma2)?;
    let cost_min = epipolar_cost(&spectrum.min_vector(), set);
    let cost_second = epipolar_cost(&spectrum.second_vector(), set);
    let ratio = cost_second / cost_min.max(f64::MIN_POSITIVE);

    if cfg.enable_degeneracy_fallback && ratio < cfg.degeneracy_ratio_threshold {
        log::debug!("degeneracy ratio {ratio:.3} below threshold; using RANSAC pose");
        let rough = match prefilter {
            Some(p) => p.rough_pose,
            None => ransac_prefilter(set, cfg)?.rough_pose,
        };
        let rough = resolve_bearing_sign(rough, set, cfg);
        return Ok(InitialPose {
            rotation: rough.rotation,
            bearing: rough.bearing,
            sigma2,
            ratio,
            used_fallback: true,
            cost_min,
            cost_second,
        });
    }

    let theta = spectrum.vector(cfg.initial_eigvec_rank.min(8));
    let hypotheses = decompose_essential(&essential_from_theta(&theta))?;
    let pose = resolve_bearing_sign(choose_rotation(&hypotheses, set)?, set, cfg);
    Ok(InitialPose {
        rotation: pose.rotation,
        bearing: pose.bearing,
        sigma2,
        ratio,
        used_fallback: false,
        cost_min,
        cost_second,
    })
}

/// Picks the rotation of the twisted pair by cheirality; the bearing sign is
/// left to [`resolve_bearing_sign`].
pub(crate) fn choose_rotation(hypotheses: &[PoseHypothesis; 4], set: &CorrespondenceSet) -> Result<PoseHypothesis> {
    match select_by_cheirality(hypotheses, set) {
        Err(Error::AmbiguousCheirality(_)) => {}
        other => return other,
    }
    // Ties between the two bearing signs of one rotation are harmless here.
    let votes = hypotheses.map(|h| cheirality_votes(&h, set));
    let first = votes[0].max(votes[1]);
    let second = votes[2].max(votes[3]);
    if first == second {
        return Err(Error::AmbiguousCheirality(first));
    }
    Ok(if first > second { hypotheses[0] } else { hypotheses[2] })
}

/// Re-decides the sign of `t̄` by cheirality at a once-refined pose.
///
/// The refinement is invariant under `t̄ → -t̄`, and the vote is far more
/// reliable once the rotation error no longer masks the parallax.
fn resolve_bearing_sign(pose: PoseHypothesis, set: &CorrespondenceSet, cfg: &EstimatorConfig) -> PoseHypothesis {
    let probe_cfg = EstimatorConfig {
        gn_iterations: 1,
        ..*cfg
    };
    let probe = gn_refine(&pose.rotation, &pose.bearing, set, &probe_cfg, None);
    if probe.steps_run == 0 {
        return pose;
    }
    let kept = cheirality_votes(&PoseHypothesis::new(probe.rotation, probe.bearing), set);
    let flipped = cheirality_votes(&PoseHypothesis::new(probe.rotation, -probe.bearing), set);
    if flipped > kept {
        log::debug!("bearing sign flipped after refinement probe ({flipped} vs {kept} votes)");
        PoseHypothesis::new(pose.rotation, -pose.bearing)
    } else {
        pose
    }
}

/// Full estimator: optional prefilter, consistent first step, then
/// `cfg.gn_iterations` Gauss-Newton steps.
pub fn cecme(set: &CorrespondenceSet, cfg: &EstimatorConfig) -> Result<PoseEstimate> {
    cfg.validate()?;
    require_points(set)?;

    let prefilter = if cfg.enable_prefilter {
        Some(ransac_prefilter(set, cfg)?)
    } else {
        None
    };
    let mut inlier_mask = prefilter
        .as_ref()
        .map(|p| p.inlier_mask.clone())
        .unwrap_or_else(|| vec![true; set.len()]);
    let mut working = match &prefilter {
        Some(_) => set.subset(&inlier_mask),
        None => set.clone(),
    };

    let (mut init, mut kernel, mut gn) = robust_pass(&working, cfg, prefilter.as_ref())?;
    if let Some(p) = &prefilter {
        // The consensus mask comes from a nine-point model; regate at the
        // refined pose and redo the first step on the corrected set.
        for _ in 0..REGATE_PASSES {
            let scale = init.sigma2.sqrt().max(robust_residual_scale(&gn.rotation, &gn.bearing, &working));
            let threshold = cfg.robust_kernel_threshold_sigmas * scale;
            let mask: Vec<bool> = set
                .iter()
                .map(|c| matches!(ml_residual(&gn.rotation, &gn.bearing, c), Ok(r) if r.norm() <= threshold))
                .collect();
            if mask == inlier_mask || mask.iter().filter(|&&b| b).count() < MIN_POINTS {
                break;
            }
            let candidate = set.subset(&mask);
            let Ok(next) = robust_pass(&candidate, cfg, Some(p)) else {
                break;
            };
            inlier_mask = mask;
            working = candidate;
            (init, kernel, gn) = next;
        }
    }
    let initial_objective_value = ml_objective(&init.rotation, &init.bearing, &working, kernel)?;

    let objective_value = ml_objective(&gn.rotation, &gn.bearing, &working, kernel)?;
    let nonpositive_depths = working
        .iter()
        .filter(|c| !matches!(k_closed_form(&gn.rotation, &gn.bearing, c), Ok(k) if k > 0.0))
        .count();

    Ok(PoseEstimate {
        rotation: gn.rotation,
        bearing: gn.bearing,
        sigma2_hat: init.sigma2,
        degeneracy_ratio: init.ratio,
        used_ransac_fallback: init.used_fallback,
        inlier_mask,
        objective_value,
        gn_steps_run: gn.steps_run,
        initial: PoseHypothesis::new(init.rotation, init.bearing),
        initial_objective_value,
        diagnostics: Diagnostics {
            prefilter_used: prefilter.is_some(),
            nonpositive_depths,
            kernel_rejected: gn.kernel_rejected,
            dropped_rows: gn.dropped,
            singular_normal_equations: gn.singular_normal_equations,
            epipolar_cost_min: init.cost_min,
            epipolar_cost_second: init.cost_second,
        },
    })
}

type PassOutput = (InitialPose, Option<f64>, GnOutcome);

fn robust_pass(
    working: &CorrespondenceSet,
    cfg: &EstimatorConfig,
    prefilter: Option<&PrefilterResult>,
) -> Result<PassOutput> {
    let init = initial_pose_with(working, cfg, prefilter)?;
    let kernel = cfg.enable_robust_kernel.then(|| {
        let scale = init.sigma2.sqrt().max(robust_residual_scale(&init.rotation, &init.bearing, working));
        cfg.robust_kernel_threshold_sigmas * scale
    });
    let gn = gn_refine(&init.rotation, &init.bearing, working, cfg, kernel);
    Ok((init, kernel, gn))
}

/// `1.4826 · median ‖r_i‖`, a noise scale that also absorbs the error of the
/// pose the residuals are taken at.
fn robust_residual_scale(rotation: &Rotation, bearing: &UnitBearing, set: &CorrespondenceSet) -> f64 {
    let mut norms: Vec<f64> = set
        .iter()
        .filter_map(|c| ml_residual(rotation, bearing, c).ok())
        .map(|r| r.norm())
        .collect();
    if norms.is_empty() {
        return 0.0;
    }
    let mid = norms.len() / 2;
    let (_, median, _) = norms.select_nth_unstable_by(mid, f64::total_cmp);
    1.4826 * *median
}

/// Mean of `‖z^h × R y^h‖ / (‖z^h‖ ‖y^h‖)`; near zero for a vanishing baseline.
pub fn pure_rotation_statistic(rotation: &Rotation, set: &CorrespondenceSet) -> f64 {
    if set.is_empty() {
        return f64::NAN;
    }
    set.iter()
        .map(|c| {
            let z = c.z_h();
            let ry = rotation.matrix() * c.y_h();
            z.cross(&ry).norm() / (z.norm() * ry.norm())
        })
        .sum::<f64>()
        / set.len() as f64
}
