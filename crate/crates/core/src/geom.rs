//! Exact two-view geometry primitives.

use std::f64::consts::PI;
use std::ops::{Mul, Neg};

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::{CorrespondenceSet, Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-9;
const UNIT_TOL: f64 = 1e-12;
/// Bearings this close to a pole use the fixed azimuth convention `beta0 = 0`.
pub const GIMBAL_TOL: f64 = 1e-8;
const PARALLEL_RAY_TOL: f64 = 1e-8;

/// Skew-symmetric matrix with `hat(v) * w == v.cross(w)`.
#[inline]
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`] on the antisymmetric part of `m`.
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Rotation matrix in SO(3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix3<f64>", into = "Matrix3<f64>")]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    /// Validates orthonormality and `det = 1` to 1e-9.
    pub fn new(matrix: Matrix3<f64>) -> Result<Self> {
        if !matrix.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("rotation has non-finite entries".into()));
        }
        let ortho = (matrix.transpose() * matrix - Matrix3::identity()).norm();
        let det = matrix.determinant();
        if ortho > ORTHONORMAL_TOL || (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::InvalidInput(format!(
                "not a rotation: ‖RᵀR - I‖ = {ortho:e}, det = {det}"
            )));
        }
        Ok(Self(matrix))
    }

    pub fn from_matrix_unchecked(matrix: Matrix3<f64>) -> Self {
        Self(matrix)
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Z-Y-X intrinsic Euler angles: `Rz(yaw) * Ry(pitch) * Rx(roll)`.
    pub fn from_euler_zyx(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self(*nalgebra::Rotation3::from_euler_angles(roll, pitch, yaw).matrix())
    }

    /// Nearest rotation in Frobenius norm.
    pub fn project(matrix: &Matrix3<f64>) -> Self {
        let svd = matrix.svd(true, true);
        let u = svd.u.expect("svd u");
        let v_t = svd.v_t.expect("svd v_t");
        let mut d = Matrix3::identity();
        if (u * v_t).determinant() < 0.0 {
            d[(2, 2)] = -1.0;
        }
        Self(u * d * v_t)
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// Geodesic angle between two rotations, radians.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        let c = ((self.0.transpose() * other.0).trace() - 1.0) / 2.0;
        c.clamp(-1.0, 1.0).acos()
    }

    pub fn check(&self) -> Result<()> {
        Self::new(self.0).map(|_| ())
    }
}

impl From<Rotation> for Matrix3<f64> {
    fn from(r: Rotation) -> Self {
        r.0
    }
}

impl TryFrom<Matrix3<f64>> for Rotation {
    type Error = Error;

    fn try_from(m: Matrix3<f64>) -> Result<Self> {
        Rotation::new(m)
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vector3<f64>> for &Rotation {
    type Output = Vector3<f64>;

    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

/// Unit translation direction on S².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vector3<f64>", into = "Vector3<f64>")]
pub struct UnitBearing(Vector3<f64>);

impl UnitBearing {
    /// Accepts a vector already of unit norm (1e-12).
    pub fn new(v: Vector3<f64>) -> Result<Self> {
        if !v.iter().all(|c| c.is_finite()) || (v.norm() - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidInput(format!(
                "bearing norm {} is not 1",
                v.norm()
            )));
        }
        Ok(Self(v))
    }

    /// Normalizes `v`; fails on zero or non-finite input.
    pub fn normalize(v: Vector3<f64>) -> Result<Self> {
        let n = v.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::InvalidInput("cannot normalize a zero vector".into()));
        }
        Ok(Self(v / n))
    }

    #[inline]
    pub fn vector(&self) -> &Vector3<f64> {
        &self.0
    }
}

impl Neg for UnitBearing {
    type Output = UnitBearing;

    fn neg(self) -> UnitBearing {
        UnitBearing(-self.0)
    }
}

impl From<UnitBearing> for Vector3<f64> {
    fn from(b: UnitBearing) -> Self {
        b.0
    }
}

impl TryFrom<Vector3<f64>> for UnitBearing {
    type Error = Error;

    fn try_from(v: Vector3<f64>) -> Result<Self> {
        UnitBearing::new(v)
    }
}

/// `E = t̄^∧ R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EssentialMatrix(Matrix3<f64>);

impl EssentialMatrix {
    /// Wraps `matrix` after checking the `(σ, σ, 0)` singular-value pattern
    /// to `tol` relative to the largest singular value.
    pub fn new(matrix: Matrix3<f64>, tol: f64) -> Result<Self> {
        check_essential(&matrix, tol)?;
        Ok(Self(matrix))
    }

    pub fn from_matrix_unchecked(matrix: Matrix3<f64>) -> Self {
        Self(matrix)
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }
}

/// Errors unless `matrix` has singular values `(σ, σ, 0)` within `tol · σ`.
pub fn check_essential(matrix: &Matrix3<f64>, tol: f64) -> Result<()> {
    let s = sorted_singular_values(matrix)?;
    if s[1] <= 1e-6 * s[0] {
        return Err(Error::RankDeficient);
    }
    if (s[0] - s[1]).abs() > tol * s[0] || s[2] > tol * s[0] {
        return Err(Error::NotEssential(format!(
            "singular values ({:e}, {:e}, {:e})",
            s[0], s[1], s[2]
        )));
    }
    Ok(())
}

fn sorted_singular_values(matrix: &Matrix3<f64>) -> Result<[f64; 3]> {
    if !matrix.iter().all(|v| v.is_finite()) {
        return Err(Error::NotEssential("non-finite entries".into()));
    }
    let mut s: Vec<f64> = matrix.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    if s[0] == 0.0 {
        return Err(Error::NotEssential("zero matrix".into()));
    }
    Ok([s[0], s[1], s[2]])
}

/// Candidate pose from the four-fold essential decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseHypothesis {
    pub rotation: Rotation,
    pub bearing: UnitBearing,
}

impl PoseHypothesis {
    pub fn new(rotation: Rotation, bearing: UnitBearing) -> Self {
        Self { rotation, bearing }
    }
}

/// Rodrigues form of `exp(s^∧)`.
pub fn exp_so3(s: &Vector3<f64>) -> Rotation {
    let theta2 = s.norm_squared();
    let k = hat(s);
    let k2 = k * k;
    let (a, b) = if theta2 < 1e-16 {
        // Series to second order; the next terms are below rounding.
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Rotation(Matrix3::identity() + k * a + k2 * b)
}

pub fn essential_from_pose(rotation: &Rotation, bearing: &UnitBearing) -> EssentialMatrix {
    EssentialMatrix(hat(bearing.vector()) * rotation.matrix())
}

/// Noise-free measurement in the second image: `W p / e3ᵀp` with
/// `p = R y^h + k t̄`.
pub fn forward_measurement(
    y: &Vector2<f64>,
    rotation: &Rotation,
    bearing: &UnitBearing,
    k: f64,
) -> Result<Vector2<f64>> {
    let p = rotation.matrix() * Vector3::new(y.x, y.y, 1.0) + bearing.vector() * k;
    if p.z <= 0.0 {
        return Err(Error::DepthBehindCamera(p.z));
    }
    Ok(Vector2::new(p.x / p.z, p.y / p.z))
}

/// Elevation/azimuth chart around a base bearing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereChart {
    pub alpha0: f64,
    pub beta0: f64,
}

impl SphereChart {
    /// `∂t̄/∂α` at the chart origin.
    pub fn d_alpha(&self) -> Vector3<f64> {
        let (sa, ca) = self.alpha0.sin_cos();
        let (sb, cb) = self.beta0.sin_cos();
        Vector3::new(-sa * cb, -sa * sb, ca)
    }

    /// `∂t̄/∂β` at the chart origin.
    pub fn d_beta(&self) -> Vector3<f64> {
        let ca = self.alpha0.cos();
        let (sb, cb) = self.beta0.sin_cos();
        Vector3::new(-ca * sb, ca * cb, 0.0)
    }
}

pub fn sphere_chart(bearing: &UnitBearing) -> SphereChart {
    let t = bearing.vector();
    let alpha0 = t.z.clamp(-1.0, 1.0).asin();
    let beta0 = if t.z.abs() >= 1.0 - GIMBAL_TOL {
        0.0
    } else {
        let b = t.y.atan2(t.x);
        // atan2(-0.0, x<0) is -π; keep the range (-π, π].
        if b <= -PI {
            PI
        } else {
            b
        }
    };
    SphereChart { alpha0, beta0 }
}

pub fn chart_point(chart: &SphereChart, alpha: f64, beta: f64) -> UnitBearing {
    let (sa, ca) = (chart.alpha0 + alpha).sin_cos();
    let (sb, cb) = (chart.beta0 + beta).sin_cos();
    UnitBearing(Vector3::new(ca * cb, ca * sb, sa))
}

/// Four `(R, ±t̄)` candidates of an essential matrix after projecting it to
/// singular values `(1, 1, 0)`. Invariant to nonzero scaling of `e`.
pub fn decompose_essential(e: &Matrix3<f64>) -> Result<[PoseHypothesis; 4]> {
    let s = sorted_singular_values(e)?;
    if s[1] <= 1e-6 * s[0] {
        return Err(Error::RankDeficient);
    }
    let svd = e.svd(true, true);
    let mut u = svd.u.expect("svd u");
    let mut v_t = svd.v_t.expect("svd v_t");
    // Order columns by descending singular value.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    if order != [0, 1, 2] {
        let (u0, vt0) = (u, v_t);
        for (dst, &src) in order.iter().enumerate() {
            u.set_column(dst, &u0.column(src));
            v_t.set_row(dst, &vt0.row(src));
        }
    }
    if u.determinant() < 0.0 {
        u.set_column(2, &(-u.column(2)));
    }
    if v_t.determinant() < 0.0 {
        v_t.set_row(2, &(-v_t.row(2)));
    }
    let w = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let r1 = Rotation(u * w * v_t);
    let r2 = Rotation(u * w.transpose() * v_t);
    let t = UnitBearing::normalize(u.column(2).into_owned())?;
    Ok([
        PoseHypothesis::new(r1, t),
        PoseHypothesis::new(r1, -t),
        PoseHypothesis::new(r2, t),
        PoseHypothesis::new(r2, -t),
    ])
}

/// Midpoint triangulation. Returns the signed depths of the point along the
/// first and second optical axes, in units of the baseline length.
pub fn triangulate_depths(
    y: &Vector2<f64>,
    z: &Vector2<f64>,
    rotation: &Rotation,
    bearing: &UnitBearing,
) -> Result<(f64, f64)> {
    let r = rotation.matrix();
    let t = bearing.vector();
    let d1 = Vector3::new(y.x, y.y, 1.0);
    let d2 = r.transpose() * Vector3::new(z.x, z.y, 1.0);
    let c2 = -(r.transpose() * t);

    let sin_angle = d1.cross(&d2).norm() / (d1.norm() * d2.norm());
    if sin_angle < PARALLEL_RAY_TOL {
        return Err(Error::DegenerateRays);
    }
    let a = d1.dot(&d1);
    let b = d1.dot(&d2);
    let c = d2.dot(&d2);
    let d = d1.dot(&c2);
    let e = d2.dot(&c2);
    let det = a * c - b * b;
    let lambda1 = (c * d - b * e) / det;
    let lambda2 = (b * d - a * e) / det;
    let x = (d1 * lambda1 + c2 + d2 * lambda2) * 0.5;
    let depth_second = (r * x + t).z;
    Ok((x.z, depth_second))
}

/// Number of correspondences triangulated in front of both cameras.
pub fn cheirality_votes(hypothesis: &PoseHypothesis, set: &CorrespondenceSet) -> usize {
    set.iter()
        .filter(|c| {
            matches!(
                triangulate_depths(&c.y, &c.z, &hypothesis.rotation, &hypothesis.bearing),
                Ok((d1, d2)) if d1 > 0.0 && d2 > 0.0
            )
        })
        .count()
}

/// Picks the hypothesis with the most points in front of both cameras.
pub fn select_by_cheirality(
    hypotheses: &[PoseHypothesis; 4],
    set: &CorrespondenceSet,
) -> Result<PoseHypothesis> {
    if set.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: set.len(),
        });
    }
    let votes: Vec<usize> = hypotheses
        .iter()
        .map(|h| cheirality_votes(h, set))
        .collect();
    let (best, &best_votes) = votes
        .iter()
        .enumerate()
        .max_by_key(|(_, v)| **v)
        .expect("four hypotheses");
    if votes
        .iter()
        .enumerate()
        .any(|(i, &v)| i != best && v == best_votes)
    {
        return Err(Error::AmbiguousCheirality(best_votes));
    }
    Ok(hypotheses[best])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Correspondence;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn generic_pose() -> (Rotation, UnitBearing) {
        (
            Rotation::from_euler_zyx(0.3, -0.2, 0.4),
            UnitBearing::normalize(Vector3::new(0.4, -0.3, 0.2)).unwrap(),
        )
    }

    fn scene(rotation: &Rotation, t: &Vector3<f64>) -> (CorrespondenceSet, Vec<Vector3<f64>>) {
        let mut pts = Vec::new();
        let mut items = Vec::new();
        for i in 0..40 {
            let f = i as f64;
            let x = Vector3::new(
                0.5 * (f * 0.7).sin(),
                0.4 * (f * 1.3).cos(),
                2.0 + 1.5 * (f * 0.37).sin(),
            );
            let x2 = rotation.matrix() * x + t;
            items.push(Correspondence::from_coords(
                x.x / x.z,
                x.y / x.z,
                x2.x / x2.z,
                x2.y / x2.z,
            ));
            pts.push(x);
        }
        (CorrespondenceSet::new(items).unwrap(), pts)
    }

    /// Truncated exponential series, independent of the Rodrigues path.
    fn exp_series(s: &Vector3<f64>) -> Matrix3<f64> {
        let k = hat(s);
        let mut term = Matrix3::identity();
        let mut sum = Matrix3::identity();
        for n in 1..40 {
            term = term * k / n as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn hat_matches_cross_product_layout() {
        let m = hat(&Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(m, Matrix3::new(0.0, -3.0, 2.0, 3.0, 0.0, -1.0, -2.0, 1.0, 0.0));
        assert_eq!(hat(&Vector3::zeros()), Matrix3::zeros());
        let v = Vector3::new(0.3, -1.2, 0.7);
        assert!((hat(&v) * v).norm() < 1e-15);
        assert_eq!(vee(&hat(&v)), v);
    }

    #[test]
    fn exp_so3_known_values() {
        assert_eq!(exp_so3(&Vector3::zeros()).matrix(), &Matrix3::identity());
        let s = Vector3::new(0.0, 0.0, PI / 2.0);
        let expected = exp_series(&s);
        assert!((exp_so3(&s).matrix() - expected).norm() < 1e-12);
        let quarter = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((expected - quarter).norm() < 1e-12);
    }

    #[test]
    fn exp_so3_small_angle_matches_series() {
        let s = Vector3::new(1e-9, -2e-9, 5e-10);
        assert!((exp_so3(&s).matrix() - exp_series(&s)).norm() < 1e-15);
    }

    #[test]
    fn essential_from_identity_and_x_axis() {
        let e = essential_from_pose(
            &Rotation::identity(),
            &UnitBearing::new(Vector3::x()).unwrap(),
        );
        assert_eq!(
            e.matrix(),
            &Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0)
        );
    }

    #[test]
    fn essential_satisfies_epipolar_constraint() {
        let (r, b) = generic_pose();
        let t = b.vector() * 0.3;
        let (set, _) = scene(&r, &t);
        let e = essential_from_pose(&r, &b);
        for c in &set {
            assert!((c.z_h().transpose() * e.matrix() * c.y_h())[0].abs() < 1e-12);
        }
        assert_relative_eq!(e.matrix().norm(), 2f64.sqrt(), epsilon = 1e-12);
        check_essential(e.matrix(), 1e-8).unwrap();
    }

    #[test]
    fn forward_measurement_examples() {
        let r = Rotation::identity();
        let z = forward_measurement(&Vector2::zeros(), &r, &UnitBearing::new(Vector3::z()).unwrap(), 0.5)
            .unwrap();
        assert_eq!(z, Vector2::zeros());
        let z = forward_measurement(&Vector2::zeros(), &r, &UnitBearing::new(Vector3::x()).unwrap(), 1.0)
            .unwrap();
        assert_eq!(z, Vector2::new(1.0, 0.0));
        let err = forward_measurement(
            &Vector2::zeros(),
            &r,
            &UnitBearing::new(-Vector3::z()).unwrap(),
            2.0,
        );
        assert!(matches!(err, Err(Error::DepthBehindCamera(_))));
    }

    #[test]
    fn forward_measurement_matches_projection() {
        let (r, b) = generic_pose();
        let t = b.vector() * 0.25;
        let x = Vector3::new(0.3, -0.2, 3.1);
        let y = Vector2::new(x.x / x.z, x.y / x.z);
        let x2 = r.matrix() * x + t;
        let z = Vector2::new(x2.x / x2.z, x2.y / x2.z);
        let got = forward_measurement(&y, &r, &b, t.norm() / x.z).unwrap();
        assert!((got - z).norm() < 1e-12);
    }

    #[test]
    fn sphere_chart_examples() {
        let c = sphere_chart(&UnitBearing::normalize(Vector3::new(1.0, 1.0, 1.0)).unwrap());
        // asin(1/√3)
        assert_relative_eq!(c.alpha0, 0.615_479_708_670_387_3, epsilon = 1e-12);
        assert_relative_eq!(c.beta0, PI / 4.0, epsilon = 1e-15);
        let c = sphere_chart(&UnitBearing::new(Vector3::z()).unwrap());
        assert_eq!((c.alpha0, c.beta0), (PI / 2.0, 0.0));
        let c = sphere_chart(&UnitBearing::new(Vector3::new(-1.0, 0.0, 0.0)).unwrap());
        assert_eq!(c.beta0, PI);
        let c = sphere_chart(&UnitBearing::new(Vector3::new(-1.0, -0.0, 0.0)).unwrap());
        assert_eq!(c.beta0, PI);
    }

    #[test]
    fn chart_point_examples() {
        let c = sphere_chart(&UnitBearing::new(Vector3::x()).unwrap());
        assert!((chart_point(&c, 0.0, 0.0).vector() - Vector3::x()).norm() < 1e-15);
        assert!((chart_point(&c, PI / 2.0, 0.0).vector() - Vector3::z()).norm() < 1e-15);
    }

    #[test]
    fn chart_derivatives_match_finite_differences() {
        let c = sphere_chart(&UnitBearing::normalize(Vector3::new(0.3, -0.8, 0.5)).unwrap());
        let h = 1e-6;
        let fd_a = (chart_point(&c, h, 0.0).vector() - chart_point(&c, -h, 0.0).vector()) / (2.0 * h);
        let fd_b = (chart_point(&c, 0.0, h).vector() - chart_point(&c, 0.0, -h).vector()) / (2.0 * h);
        assert!((fd_a - c.d_alpha()).norm() < 1e-9);
        assert!((fd_b - c.d_beta()).norm() < 1e-9);
    }

    #[test]
    fn decompose_round_trip_and_scale_invariance() {
        let (r, b) = generic_pose();
        let e = *essential_from_pose(&r, &b).matrix();
        let hyps = decompose_essential(&e).unwrap();
        assert!(hyps.iter().any(|h| (h.rotation.matrix() - r.matrix()).norm() < 1e-8
            && (h.bearing.vector() - b.vector()).norm() < 1e-8));
        let en = e / e.norm() * 2f64.sqrt();
        for h in &hyps {
            h.rotation.check().unwrap();
            let back = essential_from_pose(&h.rotation, &h.bearing);
            let d = (back.matrix() - en).norm().min((back.matrix() + en).norm());
            assert!(d < 1e-8, "{d}");
        }
        let scaled = decompose_essential(&(e * -3.7)).unwrap();
        for h in &hyps {
            assert!(scaled.iter().any(|s| (s.rotation.matrix() - h.rotation.matrix()).norm() < 1e-10
                && (s.bearing.vector() - h.bearing.vector()).norm() < 1e-10));
        }
    }

    #[test]
    fn decompose_pure_z_translation() {
        // hat(e3) = U diag(1,1,0) Vᵀ by inspection; one candidate is I, the
        // other the half-turn about e3.
        let hyps = decompose_essential(&hat(&Vector3::z())).unwrap();
        let half_turn = Matrix3::new(-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0);
        let mut found_i = false;
        let mut found_half = false;
        for h in &hyps {
            found_i |= (h.rotation.matrix() - Matrix3::identity()).norm() < 1e-12;
            found_half |= (h.rotation.matrix() - half_turn).norm() < 1e-12;
        }
        assert!(found_i && found_half);
    }

    #[test]
    fn decompose_rejects_rank_deficient() {
        let m = Vector3::new(1.0, 2.0, 3.0) * Vector3::new(0.5, -1.0, 0.2).transpose();
        assert_eq!(decompose_essential(&m).unwrap_err(), Error::RankDeficient);
        assert!(matches!(
            decompose_essential(&Matrix3::zeros()),
            Err(Error::NotEssential(_))
        ));
        assert!(matches!(
            check_essential(&Matrix3::identity(), 1e-6),
            Err(Error::NotEssential(_))
        ));
    }

    #[test]
    fn triangulation_recovers_depth() {
        let (r, b) = generic_pose();
        let norm_t = 0.3;
        let t = b.vector() * norm_t;
        let (set, pts) = scene(&r, &t);
        for (c, x) in set.iter().zip(&pts) {
            let (d1, d2) = triangulate_depths(&c.y, &c.z, &r, &b).unwrap();
            assert_relative_eq!(d1 * norm_t, x.z, max_relative = 1e-9);
            assert!(d2 > 0.0);
            let (f1, f2) = triangulate_depths(&c.y, &c.z, &r, &-b).unwrap();
            assert!(f1 < 0.0 || f2 < 0.0);
        }
        assert_eq!(
            triangulate_depths(&Vector2::zeros(), &Vector2::zeros(), &Rotation::identity(), &b),
            Err(Error::DegenerateRays)
        );
    }

    #[test]
    fn cheirality_selects_truth() {
        let (r, b) = generic_pose();
        let (set, _) = scene(&r, &(b.vector() * 0.3));
        let hyps = decompose_essential(essential_from_pose(&r, &b).matrix()).unwrap();
        let chosen = select_by_cheirality(&hyps, &set).unwrap();
        assert!((chosen.rotation.matrix() - r.matrix()).norm() < 1e-8);
        assert!((chosen.bearing.vector() - b.vector()).norm() < 1e-8);

        let single = set.select(&[0, 1]);
        let one = set.select(&[3]);
        let votes: Vec<usize> = hyps.iter().map(|h| cheirality_votes(h, &one)).collect();
        assert_eq!(votes.iter().sum::<usize>(), 1);
        assert!(select_by_cheirality(&hyps, &single).is_ok());
        assert!(matches!(
            select_by_cheirality(&hyps, &one),
            Err(Error::TooFewPoints { .. })
        ));
    }

    proptest! {
        #[test]
        fn exp_so3_is_rotation(sx in -4.0..4.0f64, sy in -4.0..4.0f64, sz in -4.0..4.0f64) {
            let s = Vector3::new(sx, sy, sz);
            let r = exp_so3(&s);
            prop_assert!(r.check().is_ok());
            let prod = r.matrix() * exp_so3(&-s).matrix();
            prop_assert!((prod - Matrix3::identity()).norm() < 1e-12);
        }

        #[test]
        fn hat_is_antisymmetric(x in -10.0..10.0f64, y in -10.0..10.0f64, z in -10.0..10.0f64) {
            let h = hat(&Vector3::new(x, y, z));
            prop_assert_eq!(h.transpose(), -h);
        }

        #[test]
        fn chart_origin_is_identity(x in -1.0..1.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64) {
            let v = Vector3::new(x, y, z);
            prop_assume!(v.norm() > 1e-3);
            let b = UnitBearing::normalize(v).unwrap();
            prop_assume!(b.vector().z.abs() <= 1.0 - 1e-6);
            let c = sphere_chart(&b);
            prop_assert!((chart_point(&c, 0.0, 0.0).vector() - b.vector()).norm() < 1e-12);
            prop_assert!(c.beta0 > -PI && c.beta0 <= PI);
        }

        #[test]
        fn chart_point_is_unit(a in -10.0..10.0f64, bb in -10.0..10.0f64) {
            let c = SphereChart { alpha0: 0.3, beta0: -2.0 };
            prop_assert!((chart_point(&c, a, bb).vector().norm() - 1.0).abs() < 1e-15);
        }
    }
}
