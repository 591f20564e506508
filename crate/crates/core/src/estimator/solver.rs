//! Named pose solvers selectable at runtime.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::design::{build_design, epipolar_cost, essential_from_theta, estimate_noise_variance, Spectrum};
use super::pipeline::{cecme, Diagnostics, PoseEstimate, MIN_POINTS};
use super::EstimatorConfig;
use crate::geom::{decompose_essential, select_by_cheirality};
use crate::{CorrespondenceSet, Error, Result};

pub trait PoseSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn estimate(&self, set: &CorrespondenceSet, cfg: &EstimatorConfig) -> Result<PoseEstimate>;
}

/// Consistent first step followed by Gauss-Newton refinement.
#[derive(Debug, Default, Clone, Copy)]
pub struct Cecme;

impl PoseSolver for Cecme {
    fn name(&self) -> &'static str {
        "cecme"
    }

    fn description(&self) -> &'static str {
        "bias-eliminated eigenvector initialization + Gauss-Newton on SO(3) x S²"
    }

    fn estimate(&self, set: &CorrespondenceSet, cfg: &EstimatorConfig) -> Result<PoseEstimate> {
        cecme(set, cfg)
    }
}

/// The consistent first step alone.
#[derive(Debug, Default, Clone, Copy)]
pub struct CecmeInit;

impl PoseSolver for CecmeInit {
    fn name(&self) -> &'static str {
        "cecme-init"
    }

    fn description(&self) -> &'static str {
        "bias-eliminated eigenvector initialization without refinement"
    }

    fn estimate(&self, set: &CorrespondenceSet, cfg: &EstimatorConfig) -> Result<PoseEstimate> {
        let cfg = EstimatorConfig {
            gn_iterations: 0,
            ..*cfg
        };
        cecme(set, &cfg)
    }
}

/// Classical linear solver: smallest eigenvector of the uncorrected `Q`.
#[derive(Debug, Default, Clone, Copy)]
pub struct EightPoint;

impl PoseSolver for EightPoint {
    fn name(&self) -> &'static str {
        "eight-point"
    }

    fn description(&self) -> &'static str {
        "smallest eigenvector of the algebraic-error design matrix, no bias elimination"
    }

    fn estimate(&self, set: &CorrespondenceSet, _cfg: &EstimatorConfig) -> Result<PoseEstimate> {
        if set.len() < MIN_POINTS {
            return Err(Error::TooFewPoints {
                needed: MIN_POINTS,
                got: set.len(),
            });
        }
        let design = build_design(set);
        let spectrum = Spectrum::of(&design.q)?;
        let cost_min = epipolar_cost(&spectrum.min_vector(), set);
        let cost_second = epipolar_cost(&spectrum.second_vector(), set);
        let pose = select_by_cheirality(
            &decompose_essential(&essential_from_theta(&spectrum.min_vector()))?,
            set,
        )?;
        let objective = super::ml_objective(&pose.rotation, &pose.bearing, set, None)?;
        Ok(PoseEstimate {
            rotation: pose.rotation,
            bearing: pose.bearing,
            sigma2_hat: estimate_noise_variance(&design)?,
            degeneracy_ratio: cost_second / cost_min.max(f64::MIN_POSITIVE),
            used_ransac_fallback: false,
            inlier_mask: vec![true; set.len()],
            objective_value: objective,
            gn_steps_run: 0,
            initial: pose,
            initial_objective_value: objective,
            diagnostics: Diagnostics {
                epipolar_cost_min: cost_min,
                epipolar_cost_second: cost_second,
                ..Default::default()
            },
        })
    }
}

/// Solvers keyed by name.
#[derive(Clone, Default)]
pub struct SolverRegistry {
    solvers: BTreeMap<&'static str, Arc<dyn PoseSolver>>,
}

impl SolverRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let mut registry = Self::new();
        registry.register(Cecme);
        registry.register(CecmeInit);
        registry.register(EightPoint);
        registry
    }

    /// Registers `solver`, replacing any solver of the same name.
    pub fn register<S: PoseSolver + 'static>(&mut self, solver: S) {
        self.solvers.insert(solver.name(), Arc::new(solver));
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn PoseSolver>> {
        self.solvers.get(name).cloned()
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.solvers.keys().copied()
    }
}

impl std::fmt::Debug for SolverRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_registered() {
        let reg = SolverRegistry::with_builtins();
        assert_eq!(reg.names().collect::<Vec<_>>(), ["cecme", "cecme-init", "eight-point"]);
        assert_eq!(reg.get("cecme").unwrap().name(), "cecme");
        assert!(reg.get("sdp").is_none());
    }

    #[test]
    fn register_replaces_by_name() {
        struct Stub;
        impl PoseSolver for Stub {
            fn name(&self) -> &'static str {
                "cecme"
            }
            fn description(&self) -> &'static str {
                "stub"
            }
            fn estimate(&self, _: &CorrespondenceSet, _: &EstimatorConfig) -> Result<PoseEstimate> {
                Err(Error::InvalidInput("stub".into()))
            }
        }
        let mut reg = SolverRegistry::with_builtins();
        reg.register(Stub);
        assert_eq!(reg.get("cecme").unwrap().description(), "stub");
    }
}
