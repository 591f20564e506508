//! Closed-form depth ratios `k_i` and the ML residual they induce.
//!
//! For fixed `(R, t̄)` the second-image point `u(k) = W(a + k t̄) / e3ᵀ(a + k t̄)`,
//! `a = R y^h`, moves along the epipolar line. The stationary `k` of
//! `‖z - u(k)‖²` is the ratio of two polynomials in `(a, t̄, z)`:
//!
//! ```text
//! num = a1 (a3 t1 + a3 t3 z1 - a1 t3) + a2 (a3 t2 + a3 t3 z2 - a2 t3) - a3² (t1 z1 + t2 z2)
//! den = t3 (a1 t1 + a2 t2) - t3² (a1 z1 + a2 z2) - a3 (t1² + t2²) + a3 t3 (t1 z1 + t2 z2)
//! ```
//!
//! These are the expanded forms of `y^hᵀRᵀ C1 (I ⊗ t̄) R y^h` and
//! `t̄ᵀ C2 (I ⊗ t̄) R y^h`.

use nalgebra::{Vector2, Vector3};

use crate::geom::{Rotation, UnitBearing};
use crate::{Correspondence, CorrespondenceSet, Error, Result};

const DEGENERATE_DEN: f64 = 1e-14;

/// Depth ratio with its gradients with respect to `a = R y^h` and `t̄`
/// (treated as unconstrained 3-vectors).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthRatio {
    pub k: f64,
    pub grad_a: Vector3<f64>,
    pub grad_t: Vector3<f64>,
}

pub(crate) fn depth_ratio(a: &Vector3<f64>, t: &Vector3<f64>, z: &Vector2<f64>) -> Result<DepthRatio> {
    let (a1, a2, a3) = (a.x, a.y, a.z);
    let (t1, t2, t3) = (t.x, t.y, t.z);
    let (z1, z2) = (z.x, z.y);
    let tz = t1 * z1 + t2 * z2;

    let num = a1 * (a3 * t1 + a3 * t3 * z1 - a1 * t3) + a2 * (a3 * t2 + a3 * t3 * z2 - a2 * t3)
        - a3 * a3 * tz;
    let den = t3 * (a1 * t1 + a2 * t2) - t3 * t3 * (a1 * z1 + a2 * z2) - a3 * (t1 * t1 + t2 * t2)
        + a3 * t3 * tz;
    if !(den.abs() >= DEGENERATE_DEN) {
        return Err(Error::DegenerateDepth(den));
    }

    let num_a = Vector3::new(
        -2.0 * a1 * t3 + a3 * t1 + a3 * t3 * z1,
        -2.0 * a2 * t3 + a3 * t2 + a3 * t3 * z2,
        a1 * t1 + a1 * t3 * z1 + a2 * t2 + a2 * t3 * z2 - 2.0 * a3 * tz,
    );
    let num_t = Vector3::new(
        a1 * a3 - a3 * a3 * z1,
        a2 * a3 - a3 * a3 * z2,
        -a1 * a1 + a1 * a3 * z1 - a2 * a2 + a2 * a3 * z2,
    );
    let den_a = Vector3::new(
        t1 * t3 - t3 * t3 * z1,
        t2 * t3 - t3 * t3 * z2,
        -t1 * t1 - t2 * t2 + t3 * tz,
    );
    let den_t = Vector3::new(
        a1 * t3 - 2.0 * a3 * t1 + a3 * t3 * z1,
        a2 * t3 - 2.0 * a3 * t2 + a3 * t3 * z2,
        a1 * t1 + a2 * t2 - 2.0 * t3 * (a1 * z1 + a2 * z2) + a3 * tz,
    );
    let k = num / den;
    let inv_den = 1.0 / den;
    Ok(DepthRatio {
        k,
        grad_a: (num_a - den_a * k) * inv_den,
        grad_t: (num_t - den_t * k) * inv_den,
    })
}

/// KKT-stationary depth ratio `k_i` for one correspondence.
pub fn k_closed_form(rotation: &Rotation, bearing: &UnitBearing, c: &Correspondence) -> Result<f64> {
    let a = rotation.matrix() * c.y_h();
    depth_ratio(&a, bearing.vector(), &c.z).map(|d| d.k)
}

/// `r = z - W p / e3ᵀp` with `p = R y^h + k t̄` for a given `k`.
pub fn residual_with_depth(
    rotation: &Rotation,
    bearing: &UnitBearing,
    c: &Correspondence,
    k: f64,
) -> Result<Vector2<f64>> {
    let p = rotation.matrix() * c.y_h() + bearing.vector() * k;
    if !(p.z.abs() >= DEGENERATE_DEN) {
        return Err(Error::DegenerateProjection(p.z));
    }
    Ok(c.z - Vector2::new(p.x / p.z, p.y / p.z))
}

/// ML residual with `k` eliminated in closed form.
pub fn ml_residual(rotation: &Rotation, bearing: &UnitBearing, c: &Correspondence) -> Result<Vector2<f64>> {
    let k = k_closed_form(rotation, bearing, c)?;
    residual_with_depth(rotation, bearing, c, k)
}

/// Mean of `‖r_i‖²`, each term capped at `threshold²` when given.
pub fn ml_objective(
    rotation: &Rotation,
    bearing: &UnitBearing,
    set: &CorrespondenceSet,
    kernel_threshold: Option<f64>,
) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    let cap = kernel_threshold.map(|t| t * t).unwrap_or(f64::INFINITY);
    let mut sum = 0.0;
    for c in set {
        sum += ml_residual(rotation, bearing, c)?.norm_squared().min(cap);
    }
    Ok(sum / set.len() as f64)
}
