//! Gauss-Newton refinement on SO(3) x S² with depth ratios eliminated.
//!
//! Parameters are `(s, α, β)`: `R = R̂ exp(s^∧)` and `t̄ = chart_point(α, β)`
//! around the current bearing. Each step linearizes at the origin, solves
//! `(JᵀJ) Δ = Jᵀ r` and moves to `(R̂ exp(Δs^∧), t̄(Δα, Δβ))`.

use nalgebra::{DMatrix, DVector, Matrix2x3, Matrix3x5, SMatrix, SVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::depth::depth_ratio;
use super::EstimatorConfig;
use crate::geom::{chart_point, exp_so3, hat, sphere_chart, Rotation, SphereChart, UnitBearing};
use crate::{Correspondence, CorrespondenceSet, Error, Result};

type Matrix2x5 = SMatrix<f64, 2, 5>;
type Matrix5 = SMatrix<f64, 5, 5>;
type Vector5 = SVector<f64, 5>;

/// Largest accepted condition number of `JᵀJ`.
pub const MAX_NORMAL_CONDITION: f64 = 1e12;

/// Analytic 2x5 Jacobian block and residual of one correspondence.
///
/// The block is `∂u_i/∂[s α β]` at the origin, where
/// `u_i = W p / e3ᵀp`, `p = a + k t̄` and `k` is the closed-form depth ratio.
pub(crate) fn row_block(
    rotation: &Rotation,
    chart: &SphereChart,
    c: &Correspondence,
) -> Result<(Matrix2x5, Vector2<f64>)> {
    let r = rotation.matrix();
    let t = *chart_point(chart, 0.0, 0.0).vector();
    let y_h = c.y_h();
    let a = r * y_h;
    let dk = depth_ratio(&a, &t, &c.z)?;
    let p = a + t * dk.k;
    let h = p.z;
    if !(h.abs() >= 1e-14) {
        return Err(Error::DegenerateProjection(h));
    }
    let u = Vector2::new(p.x / h, p.y / h);
    // (h W - g e3ᵀ) / h²
    let proj = Matrix2x3::new(1.0 / h, 0.0, -u.x / h, 0.0, 1.0 / h, -u.y / h);

    // ∂a/∂sᵀ = R̂ ∂(exp(s^∧) y)/∂sᵀ = -R̂ (y^h)^∧
    let da_ds = -(r * hat(&y_h));
    let dk_ds = dk.grad_a.transpose() * da_ds;
    let phi = chart.d_alpha();
    let theta = chart.d_beta();

    let mut dp = Matrix3x5::zeros();
    dp.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(da_ds + t * dk_ds));
    dp.set_column(3, &(phi * dk.k + t * dk.grad_t.dot(&phi)));
    dp.set_column(4, &(theta * dk.k + t * dk.grad_t.dot(&theta)));

    Ok((proj * dp, c.z - u))
}

/// Stacked Jacobian `J ∈ R^{2m×5}` and residual `r ∈ R^{2m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GnSystem {
    pub jacobian: DMatrix<f64>,
    pub residual: DVector<f64>,
    /// Rows zeroed by the truncated kernel.
    pub kernel_rejected: usize,
    /// Rows zeroed because the depth ratio or projection was degenerate.
    pub dropped: usize,
}

pub fn gn_system(
    rotation: &Rotation,
    chart: &SphereChart,
    set: &CorrespondenceSet,
    kernel_threshold: Option<f64>,
) -> GnSystem {
    let m = set.len();
    let mut jacobian = DMatrix::zeros(2 * m, 5);
    let mut residual = DVector::zeros(2 * m);
    let mut kernel_rejected = 0;
    let mut dropped = 0;
    for (i, c) in set.iter().enumerate() {
        match row_block(rotation, chart, c) {
            Ok((j, r)) => {
                if kernel_threshold.is_some_and(|tau| r.norm() > tau) {
                    kernel_rejected += 1;
                    continue;
                }
                jacobian.fixed_view_mut::<2, 5>(2 * i, 0).copy_from(&j);
                residual.fixed_rows_mut::<2>(2 * i).copy_from(&r);
            }
            Err(_) => dropped += 1,
        }
    }
    GnSystem {
        jacobian,
        residual,
        kernel_rejected,
        dropped,
    }
}

/// Accumulates `JᵀJ` and `Jᵀr` without materializing `J`.
#[derive(Debug, Clone, Copy)]
struct NormalEquations {
    jtj: Matrix5,
    jtr: Vector5,
    kernel_rejected: usize,
    dropped: usize,
}

fn normal_equations(
    rotation: &Rotation,
    chart: &SphereChart,
    set: &CorrespondenceSet,
    kernel_threshold: Option<f64>,
) -> NormalEquations {
    let mut jtj = Matrix5::zeros();
    let mut jtr = Vector5::zeros();
    let mut kernel_rejected = 0;
    let mut dropped = 0;
    for c in set {
        match row_block(rotation, chart, c) {
            Ok((j, r)) => {
                if kernel_threshold.is_some_and(|tau| r.norm() > tau) {
                    kernel_rejected += 1;
                    continue;
                }
                jtj += j.transpose() * j;
                jtr += j.transpose() * r;
            }
            Err(_) => dropped += 1,
        }
    }
    NormalEquations {
        jtj,
        jtr,
        kernel_rejected,
        dropped,
    }
}

fn solve_normal(jtj: &Matrix5, jtr: &Vector5) -> Option<Vector5> {
    let eig = jtj.symmetric_eigen();
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if !(lo > 0.0) || hi / lo > MAX_NORMAL_CONDITION {
        return None;
    }
    jtj.cholesky().map(|ch| ch.solve(jtr))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnOutcome {
    pub rotation: Rotation,
    pub bearing: UnitBearing,
    pub steps_run: usize,
    /// Norm of the last increment applied.
    pub last_step_norm: f64,
    /// Iteration stopped early on ill-conditioned normal equations.
    pub singular_normal_equations: bool,
    /// Kernel-rejected correspondences at the last linearization.
    pub kernel_rejected: usize,
    /// Correspondences dropped for degenerate depth at the last linearization.
    pub dropped: usize,
}

/// Runs `cfg.gn_iterations` Gauss-Newton steps from `(rotation, bearing)`.
///
/// On ill-conditioned normal equations the last valid iterate is returned
/// with `singular_normal_equations` set.
pub fn gn_refine(
    rotation: &Rotation,
    bearing: &UnitBearing,
    set: &CorrespondenceSet,
    cfg: &EstimatorConfig,
    kernel_threshold: Option<f64>,
) -> GnOutcome {
    let mut out = GnOutcome {
        rotation: *rotation,
        bearing: *bearing,
        steps_run: 0,
        last_step_norm: 0.0,
        singular_normal_equations: false,
        kernel_rejected: 0,
        dropped: 0,
    };
    for _ in 0..cfg.gn_iterations {
        let chart = sphere_chart(&out.bearing);
        let ne = normal_equations(&out.rotation, &chart, set, kernel_threshold);
        out.kernel_rejected = ne.kernel_rejected;
        out.dropped = ne.dropped;
        let Some(delta) = solve_normal(&ne.jtj, &ne.jtr) else {
            log::debug!("normal equations ill-conditioned after {} steps", out.steps_run);
            out.singular_normal_equations = true;
            break;
        };
        let ds = Vector3::new(delta[0], delta[1], delta[2]);
        out.rotation = out.rotation * exp_so3(&ds);
        out.bearing = chart_point(&chart, delta[3], delta[4]);
        out.last_step_norm = delta.norm();
        out.steps_run += 1;
    }
    out
}
