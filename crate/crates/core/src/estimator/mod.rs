//! The two-step estimator and its building blocks.

pub mod depth;
pub mod design;
pub mod pipeline;
pub mod ransac;
pub mod refine;
pub mod solver;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use depth::{k_closed_form, ml_objective, ml_residual, residual_with_depth};
pub use design::{
    bias_eliminated_spectrum, build_design, epipolar_cost, essential_from_theta,
    estimate_noise_variance, theta_from_essential, DesignMatrices, Spectrum,
};
pub use pipeline::{
    cecme, consistent_initial_pose, pure_rotation_statistic, Diagnostics, InitialPose,
    PoseEstimate, MIN_POINTS,
};
pub use ransac::{ransac_prefilter, sampson_distance, PrefilterResult};
pub use refine::{gn_refine, gn_system, GnOutcome, GnSystem};
pub use solver::{PoseSolver, SolverRegistry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacConfig {
    pub max_iterations: usize,
    /// Inlier bound on the Sampson distance, in normalized image units.
    pub inlier_threshold_normalized: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            inlier_threshold_normalized: 4e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    pub gn_iterations: usize,
    /// Replace the first-step pose by the RANSAC pose when `c2/c1` is low.
    pub enable_degeneracy_fallback: bool,
    /// `c2/c1` below this triggers the RANSAC fallback.
    pub degeneracy_ratio_threshold: f64,
    /// Truncation radius of the robust kernel in units of `σ̂`.
    pub robust_kernel_threshold_sigmas: f64,
    pub enable_robust_kernel: bool,
    pub enable_prefilter: bool,
    /// Which eigenvector of `Q^BE` seeds the pose (0 = smallest eigenvalue).
    pub initial_eigvec_rank: usize,
    pub ransac: RansacConfig,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            gn_iterations: 1,
            enable_degeneracy_fallback: true,
            degeneracy_ratio_threshold: 1.5,
            robust_kernel_threshold_sigmas: 3.0,
            enable_robust_kernel: false,
            enable_prefilter: false,
            initial_eigvec_rank: 0,
            ransac: RansacConfig::default(),
        }
    }
}

impl EstimatorConfig {
    /// Prefilter and truncated kernel both on.
    pub fn robust() -> Self {
        Self {
            enable_prefilter: true,
            enable_robust_kernel: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("estimator config: {what}")));
        if !(self.degeneracy_ratio_threshold > 1.0) {
            return bad("degeneracy_ratio_threshold must exceed 1");
        }
        if !(self.robust_kernel_threshold_sigmas > 0.0) {
            return bad("robust_kernel_threshold_sigmas must be positive");
        }
        if !(self.ransac.inlier_threshold_normalized > 0.0) {
            return bad("ransac.inlier_threshold_normalized must be positive");
        }
        if self.ransac.max_iterations == 0 {
            return bad("ransac.max_iterations must be positive");
        }
        if self.initial_eigvec_rank > 8 {
            return bad("initial_eigvec_rank must be in 0..=8");
        }
        Ok(())
    }
}
