//! Constrained Cramér-Rao bound for `ξ = [vec(R); t̄]`.
//!
//! The measurement model is `u_i = W p_i / e3ᵀp_i` with `p_i = R y_i^h + k_i t̄`
//! and `k_i` the closed-form depth ratio. The nine rotation entries and three
//! bearing entries are tied by seven equality constraints, so the bound is
//! taken on the five-dimensional tangent space.

use nalgebra::{Matrix2x3, Matrix3, SMatrix, SymmetricEigen, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::estimator::depth::depth_ratio;
use crate::geom::{forward_measurement, Rotation, UnitBearing};
use crate::{Error, Result};

pub type Matrix12 = SMatrix<f64, 12, 12>;
pub type Matrix2x12 = SMatrix<f64, 2, 12>;
pub type Matrix7x12 = SMatrix<f64, 7, 12>;
pub type Matrix12x5 = SMatrix<f64, 12, 5>;

const DEGENERATE_DEPTH: f64 = 1e-14;
const MAX_CONDITION: f64 = 1e12;
const RANK_TOL: f64 = 1e-10;

/// Noise-free description of a two-view scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthScene {
    pub rotation: Rotation,
    pub bearing: UnitBearing,
    /// `‖t‖` in meters.
    pub translation_norm: f64,
    /// Noise-free first-image points in normalized coordinates.
    pub first_image_points: Vec<Vector2<f64>>,
    /// First-camera depths in meters.
    pub depths: Vec<f64>,
    /// Common noise variance in normalized units².
    pub sigma2: f64,
    /// Per-correspondence variances; overrides `sigma2` when present.
    #[serde(default)]
    pub point_sigma2: Option<Vec<f64>>,
}

impl GroundTruthScene {
    pub fn len(&self) -> usize {
        self.first_image_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_image_points.is_empty()
    }

    /// `k_i = ‖t‖ / x_{i3}`.
    pub fn depth_ratio(&self, index: usize) -> f64 {
        self.translation_norm / self.depths[index]
    }

    pub fn variance(&self, index: usize) -> f64 {
        match &self.point_sigma2 {
            Some(v) => v[index],
            None => self.sigma2,
        }
    }

    /// Noise-free second-image point.
    pub fn measurement(&self, index: usize) -> Result<Vector2<f64>> {
        forward_measurement(
            &self.first_image_points[index],
            &self.rotation,
            &self.bearing,
            self.depth_ratio(index),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.len();
        let bad = |what: String| Err(Error::InvalidInput(what));
        if m == 0 {
            return bad("scene has no points".into());
        }
        if self.depths.len() != m {
            return bad(format!("{} depths for {m} points", self.depths.len()));
        }
        if let Some(i) = self.depths.iter().position(|d| !(*d > 0.0)) {
            return bad(format!("depth {i} is not positive"));
        }
        if !(self.translation_norm >= 0.0) {
            return bad("translation norm must be nonnegative".into());
        }
        if !(self.sigma2 > 0.0) {
            return bad("sigma2 must be positive".into());
        }
        if let Some(v) = &self.point_sigma2 {
            if v.len() != m {
                return bad(format!("{} point variances for {m} points", v.len()));
            }
            if v.iter().any(|s| !(*s > 0.0)) {
                return bad("point variances must be positive".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrbReport {
    pub fisher: Matrix12,
    pub constrained_fim: Matrix12,
    pub crb_total: f64,
    /// Trace of the `vec(R)` block; comparable to a squared Frobenius error.
    pub crb_rotation: f64,
    pub crb_translation: f64,
    pub fisher_singular: bool,
}

/// `∂u_i/∂ξ` at ground truth, with `k_i` differentiated through its closed form.
pub fn measurement_jacobian_xi(scene: &GroundTruthScene, index: usize) -> Result<Matrix2x12> {
    if index >= scene.len() {
        return Err(Error::InvalidInput(format!("index {index} out of range for {} points", scene.len())));
    }
    let y_h = scene.first_image_points[index].push(1.0);
    let big_r = scene.rotation.matrix();
    let t = scene.bearing.vector();
    let a = big_r * y_h;
    let k = scene.depth_ratio(index);
    let p = a + t * k;
    if !(p.z.abs() >= DEGENERATE_DEPTH) {
        return Err(Error::DegenerateProjection(p.z));
    }
    let z = Vector2::new(p.x / p.z, p.y / p.z);
    let grads = depth_ratio(&a, t, &z)?;

    let proj = projection_jacobian(&p);
    let dp_da = Matrix3::identity() + t * grads.grad_a.transpose();
    let dp_dt = Matrix3::identity() * k + t * grads.grad_t.transpose();
    let du_da = proj * dp_da;

    let mut jac = Matrix2x12::zeros();
    // a = Σ_k y_k R[:, k], so ∂a/∂vec(R) = y^hᵀ ⊗ I₃.
    for col in 0..3 {
        jac.fixed_view_mut::<2, 3>(0, 3 * col).copy_from(&(du_da * y_h[col]));
    }
    jac.fixed_view_mut::<2, 3>(0, 9).copy_from(&(proj * dp_dt));
    Ok(jac)
}

fn projection_jacobian(p: &Vector3<f64>) -> Matrix2x3<f64> {
    let h = p.z;
    Matrix2x3::new(1.0 / h, 0.0, -p.x / (h * h), 0.0, 1.0 / h, -p.y / (h * h))
}

/// `F = Σ_i J_iᵀ J_i / σ_i²`.
pub fn fisher_information(scene: &GroundTruthScene) -> Result<Matrix12> {
    scene.validate()?;
    let mut f = Matrix12::zeros();
    for i in 0..scene.len() {
        let j = measurement_jacobian_xi(scene, i)?;
        f += j.transpose() * j / scene.variance(i);
    }
    Ok((f + f.transpose()) * 0.5)
}

/// Constraint Jacobian `H` and an orthonormal basis `U` of its nullspace.
pub fn constraint_nullspace(rotation: &Rotation, bearing: &UnitBearing) -> Result<(Matrix7x12, Matrix12x5)> {
    let r = rotation.matrix();
    let c = [r.column(0).into_owned(), r.column(1).into_owned(), r.column(2).into_owned()];
    let t = bearing.vector();
    let mut h = Matrix7x12::zeros();
    let mut put = |row: usize, block: usize, v: Vector3<f64>| {
        let mut view = h.fixed_view_mut::<1, 3>(row, 3 * block);
        view += v.transpose();
    };
    // Rows: c1·c1, c1·c2, c1·c3, c2·c2, c2·c3, c3·c3, t·t.
    put(0, 0, c[0] * 2.0);
    put(1, 0, c[1]);
    put(1, 1, c[0]);
    put(2, 0, c[2]);
    put(2, 2, c[0]);
    put(3, 1, c[1] * 2.0);
    put(4, 1, c[2]);
    put(4, 2, c[1]);
    put(5, 2, c[2] * 2.0);
    put(6, 3, t * 2.0);

    // Padding to a square matrix makes the SVD return a full right basis.
    let mut padded = Matrix12::zeros();
    padded.fixed_view_mut::<7, 12>(0, 0).copy_from(&h);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::RankLoss)?;
    let mut order: Vec<usize> = (0..12).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let largest = svd.singular_values[order[0]];
    if !(svd.singular_values[order[6]] > RANK_TOL * largest) {
        return Err(Error::RankLoss);
    }
    let mut u = Matrix12x5::zeros();
    for (dst, &src) in order.iter().skip(7).enumerate() {
        u.set_column(dst, &v_t.row(src).transpose());
    }
    Ok((h, u))
}

/// `F_c = U (UᵀFU)⁻¹ Uᵀ` and its block traces.
pub fn constrained_crb(scene: &GroundTruthScene) -> Result<CrbReport> {
    let fisher = fisher_information(scene)?;
    let (_, u) = constraint_nullspace(&scene.rotation, &scene.bearing)?;
    let reduced = u.transpose() * fisher * u;
    let eig = SymmetricEigen::new((reduced + reduced.transpose()) * 0.5);
    let lo = eig.eigenvalues.min();
    let hi = eig.eigenvalues.max();
    if !(lo > 0.0) || hi / lo > MAX_CONDITION {
        log::debug!("reduced Fisher information is singular (eigenvalues {lo:e}..{hi:e})");
        return Ok(CrbReport {
            fisher,
            constrained_fim: Matrix12::from_element(f64::INFINITY),
            crb_total: f64::INFINITY,
            crb_rotation: f64::INFINITY,
            crb_translation: f64::INFINITY,
            fisher_singular: true,
        });
    }
    let inv_diag = eig.eigenvalues.map(|v| 1.0 / v);
    let reduced_inv = eig.eigenvectors * nalgebra::Matrix5::from_diagonal(&inv_diag) * eig.eigenvectors.transpose();
    let fc = u * reduced_inv * u.transpose();
    let crb_rotation = (0..9).map(|i| fc[(i, i)]).sum();
    let crb_translation = (9..12).map(|i| fc[(i, i)]).sum();
    Ok(CrbReport {
        fisher,
        constrained_fim: fc,
        crb_total: fc.trace(),
        crb_rotation,
        crb_translation,
        fisher_singular: false,
    })
}
