//! Two-view camera motion estimation with a consistent first step and a
//! single Gauss-Newton refinement on SO(3) x S².
//!
//! All geometry works in normalized image coordinates (focal length 1).
//! The first camera frame is the world frame and a point `x` in that frame
//! maps to `R x + t` in the second camera.
//!
//! Modules:
//!
//! - [`geom`]: hat map, SO(3) exponential, sphere chart, essential matrix
//!   construction and decomposition, triangulation and cheirality voting.
//! - [`estimator`]: the estimator pipeline (design matrices, noise variance,
//!   bias elimination, closed-form depth ratios, Gauss-Newton refinement,
//!   RANSAC prefilter) and the named solver registry.
//! - [`crb`]: constrained Cramér-Rao bound for `(R, t̄)`.
//! - [`synth`]: synthetic scenes and noisy correspondences.

pub mod correspondence;
pub mod crb;
mod error;
pub mod estimator;
pub mod geom;
pub mod synth;

pub use correspondence::{Correspondence, CorrespondenceSet};
pub use error::{Error, Result};
pub use estimator::{cecme, EstimatorConfig, PoseEstimate, PoseSolver, SolverRegistry};
pub use geom::{EssentialMatrix, PoseHypothesis, Rotation, SphereChart, UnitBearing};
