//! Synthetic two-view scenes and noisy correspondences.
//!
//! Points are drawn uniformly in the first image, given a uniform depth,
//! and kept only if they also land inside the second image. Noise is added
//! to the second-image points only.

use nalgebra::{Matrix4, SymmetricEigen, Vector2, Vector3, Vector4};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::crb::GroundTruthScene;
use crate::geom::{Rotation, UnitBearing};
use crate::{Correspondence, CorrespondenceSet, Error, Result};

const SCENE_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;
const ATTEMPTS_PER_POINT: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub u0: f64,
    pub v0: f64,
    pub width: f64,
    pub height: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self {
            fx: 800.0,
            fy: 800.0,
            u0: 320.0,
            v0: 240.0,
            width: 640.0,
            height: 480.0,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidInput("focal lengths must be positive".into()));
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(Error::InvalidInput("image size must be positive".into()));
        }
        if !(self.u0.is_finite() && self.v0.is_finite()) {
            return Err(Error::InvalidInput("principal point must be finite".into()));
        }
        Ok(())
    }

    /// Whether a pixel lies in `[0, width] × [0, height]`.
    pub fn contains(&self, px: &Vector2<f64>) -> bool {
        (0.0..=self.width).contains(&px.x) && (0.0..=self.height).contains(&px.y)
    }
}

pub fn pixels_to_normalized(p: &Vector2<f64>, intr: &CameraIntrinsics) -> Vector2<f64> {
    Vector2::new((p.x - intr.u0) / intr.fx, (p.y - intr.v0) / intr.fy)
}

pub fn normalized_to_pixels(p: &Vector2<f64>, intr: &CameraIntrinsics) -> Vector2<f64> {
    Vector2::new(p.x * intr.fx + intr.u0, p.y * intr.fy + intr.v0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    IidGaussian,
    /// One σ per correspondence, uniform in `sigma_range_px`, shared by both axes.
    PerPointUniformSigma,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub sigma_px: f64,
    pub sigma_range_px: [f64; 2],
    pub outlier_rate: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            kind: NoiseKind::IidGaussian,
            sigma_px: 0.5,
            sigma_range_px: [0.5, 1.5],
            outlier_rate: 0.0,
        }
    }
}

impl NoiseSpec {
    pub fn iid(sigma_px: f64) -> Self {
        Self {
            kind: NoiseKind::IidGaussian,
            sigma_px,
            ..Self::default()
        }
    }

    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            ..Self::default()
        }
    }

    pub fn per_point(lo_px: f64, hi_px: f64) -> Self {
        Self {
            kind: NoiseKind::PerPointUniformSigma,
            sigma_range_px: [lo_px, hi_px],
            ..Self::default()
        }
    }

    pub fn with_outliers(self, outlier_rate: f64) -> Self {
        Self { outlier_rate, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.sigma_range_px;
        if !(self.sigma_px >= 0.0) || !(lo >= 0.0) || !(hi >= lo) {
            return Err(Error::InvalidInput("noise sigmas must be nonnegative with lo <= hi".into()));
        }
        if !(0.0..1.0).contains(&self.outlier_rate) {
            return Err(Error::InvalidInput("outlier_rate must be in [0, 1)".into()));
        }
        Ok(())
    }

    /// Mean per-axis variance in pixels².
    pub fn mean_variance_px(&self) -> f64 {
        match self.kind {
            NoiseKind::IidGaussian => self.sigma_px * self.sigma_px,
            NoiseKind::PerPointUniformSigma => {
                let [lo, hi] = self.sigma_range_px;
                (lo * lo + lo * hi + hi * hi) / 3.0
            }
            NoiseKind::None => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Meters; `x₂ = R x₁ + t`.
    pub translation: [f64; 3],
    /// `[roll, pitch, yaw]` in degrees, Z-Y-X intrinsic.
    pub euler_angles_deg: [f64; 3],
    pub intrinsics: CameraIntrinsics,
    pub depth_range: [f64; 2],
    pub point_count: usize,
    pub noise: NoiseSpec,
    /// Depth spread around the mid-range; 0 puts every point on one plane.
    pub coplanar_squash: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            translation: [0.05, 0.05, 0.05],
            euler_angles_deg: [20.0, 20.0, 20.0],
            intrinsics: CameraIntrinsics::default(),
            depth_range: [1.0, 5.0],
            point_count: 1000,
            noise: NoiseSpec::default(),
            coplanar_squash: 1.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        self.noise.validate()?;
        let [lo, hi] = self.depth_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::InvalidInput("depth_range must satisfy 0 < min <= max".into()));
        }
        if self.point_count == 0 {
            return Err(Error::InvalidInput("point_count must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.coplanar_squash) {
            return Err(Error::InvalidInput("coplanar_squash must be in [0, 1]".into()));
        }
        if !self.translation.iter().chain(&self.euler_angles_deg).all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("pose must be finite".into()));
        }
        Ok(())
    }

    pub fn rotation(&self) -> Rotation {
        let [roll, pitch, yaw] = self.euler_angles_deg.map(f64::to_radians);
        Rotation::from_euler_zyx(roll, pitch, yaw)
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::from(self.translation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScene {
    /// First-camera frame, meters.
    pub points3d: Vec<Vector3<f64>>,
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
    pub intrinsics: CameraIntrinsics,
}

impl SimScene {
    pub fn len(&self) -> usize {
        self.points3d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points3d.is_empty()
    }

    /// Same points and rotation with a different translation.
    pub fn with_translation(&self, translation: Vector3<f64>) -> Self {
        Self {
            translation,
            ..self.clone()
        }
    }

    /// Whether every point projects inside both images.
    pub fn all_visible(&self) -> bool {
        self.points3d
            .iter()
            .all(|x| visible(x, &self.rotation, &[self.translation], &self.intrinsics))
    }
}

fn project(x: &Vector3<f64>) -> Vector2<f64> {
    Vector2::new(x.x / x.z, x.y / x.z)
}

fn visible(x: &Vector3<f64>, r: &Rotation, translations: &[Vector3<f64>], intr: &CameraIntrinsics) -> bool {
    if !(x.z > 0.0) || !intr.contains(&normalized_to_pixels(&project(x), intr)) {
        return false;
    }
    translations.iter().all(|t| {
        let x2 = r.matrix() * x + t;
        x2.z > 0.0 && intr.contains(&normalized_to_pixels(&project(&x2), intr))
    })
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn generate_scene(cfg: &SimConfig) -> Result<SimScene> {
    generate_scene_visible_under(cfg, &[cfg.translation()])
}

/// Scene whose points stay visible under every translation in `translations`
/// (the scene itself uses `cfg.translation`).
pub fn generate_scene_visible_under(cfg: &SimConfig, translations: &[Vector3<f64>]) -> Result<SimScene> {
    cfg.validate()?;
    let intr = cfg.intrinsics;
    let rotation = cfg.rotation();
    let [d_lo, d_hi] = cfg.depth_range;
    let mid = 0.5 * (d_lo + d_hi);
    let mut rng = stream_rng(cfg.seed, SCENE_STREAM);
    let wanted = cfg.point_count;
    let budget = ATTEMPTS_PER_POINT.saturating_mul(wanted);
    let mut points3d = Vec::with_capacity(wanted);
    let mut attempts = 0;
    while points3d.len() < wanted {
        if attempts >= budget {
            return Err(Error::VisibilityExhausted {
                found: points3d.len(),
                wanted,
                attempts,
            });
        }
        attempts += 1;
        let px = Vector2::new(rng.gen_range(0.0..=intr.width), rng.gen_range(0.0..=intr.height));
        let depth = rng.gen_range(d_lo..=d_hi);
        let depth = mid + cfg.coplanar_squash * (depth - mid);
        let x = pixels_to_normalized(&px, &intr).push(1.0) * depth;
        if visible(&x, &rotation, translations, &intr) {
            points3d.push(x);
        }
    }
    Ok(SimScene {
        points3d,
        rotation,
        translation: cfg.translation(),
        intrinsics: intr,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimMeasurements {
    pub set: CorrespondenceSet,
    pub truth: GroundTruthScene,
    pub outlier_mask: Vec<bool>,
}

/// Noisy correspondences for `scene`. With no noise the nominal variance in
/// `truth` is one pixel² so the bound stays finite.
pub fn make_correspondences(scene: &SimScene, noise: &NoiseSpec, seed: u64) -> Result<SimMeasurements> {
    noise.validate()?;
    let intr = &scene.intrinsics;
    let norm_t = scene.translation.norm();
    let bearing = if norm_t > 0.0 {
        UnitBearing::normalize(scene.translation)?
    } else {
        // Direction is arbitrary for a vanishing baseline.
        UnitBearing::new(Vector3::z())?
    };
    let mut rng = stream_rng(seed, NOISE_STREAM);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let m = scene.len();
    let mut items = Vec::with_capacity(m);
    let mut outlier_mask = Vec::with_capacity(m);
    let mut first_image_points = Vec::with_capacity(m);
    let mut depths = Vec::with_capacity(m);
    let mut point_sigma2 = Vec::with_capacity(m);
    let scale2 = 1.0 / (intr.fx * intr.fx);

    for x in &scene.points3d {
        let y = project(x);
        let z_clean = project(&(scene.rotation.matrix() * x + scene.translation));
        let sigma_px = match noise.kind {
            NoiseKind::IidGaussian => noise.sigma_px,
            NoiseKind::PerPointUniformSigma => {
                let [lo, hi] = noise.sigma_range_px;
                if hi > lo {
                    rng.gen_range(lo..=hi)
                } else {
                    lo
                }
            }
            NoiseKind::None => 0.0,
        };
        let eps = Vector2::new(
            unit.sample(&mut rng) * sigma_px / intr.fx,
            unit.sample(&mut rng) * sigma_px / intr.fy,
        );
        let is_outlier = noise.outlier_rate > 0.0 && rng.gen_bool(noise.outlier_rate);
        let z = if is_outlier {
            let px = Vector2::new(rng.gen_range(0.0..=intr.width), rng.gen_range(0.0..=intr.height));
            pixels_to_normalized(&px, intr)
        } else {
            z_clean + eps
        };
        items.push(Correspondence::new(y, z));
        outlier_mask.push(is_outlier);
        first_image_points.push(y);
        depths.push(x.z);
        point_sigma2.push(sigma_px * sigma_px * scale2);
    }

    let sigma2 = match noise.kind {
        NoiseKind::None => scale2,
        _ => (noise.mean_variance_px() * scale2).max(f64::MIN_POSITIVE),
    };
    let truth = GroundTruthScene {
        rotation: scene.rotation,
        bearing,
        translation_norm: norm_t,
        first_image_points,
        depths,
        sigma2,
        point_sigma2: matches!(noise.kind, NoiseKind::PerPointUniformSigma).then_some(point_sigma2),
    };
    Ok(SimMeasurements {
        set: CorrespondenceSet::new(items)?,
        truth,
        outlier_mask,
    })
}

/// Smallest eigenvalue of `(1/m) Σ x^h x^hᵀ`; zero for coplanar points.
pub fn coplanarity_statistic(points3d: &[Vector3<f64>]) -> Result<f64> {
    if points3d.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: points3d.len(),
        });
    }
    let mut gram = Matrix4::zeros();
    for x in points3d {
        let h = Vector4::new(x.x, x.y, x.z, 1.0);
        gram.ger(1.0, &h, &h, 1.0);
    }
    gram /= points3d.len() as f64;
    Ok(SymmetricEigen::new((gram + gram.transpose()) * 0.5).eigenvalues.min())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::essential_from_pose;

    fn small_cfg(m: usize) -> SimConfig {
        SimConfig {
            point_count: m,
            ..SimConfig::default()
        }
    }

    #[test]
    fn default_scene_is_visible() {
        let scene = generate_scene(&SimConfig::default()).unwrap();
        assert_eq!(scene.len(), 1000);
        assert!(scene.all_visible());
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = small_cfg(200);
        assert_eq!(generate_scene(&cfg).unwrap(), generate_scene(&cfg).unwrap());
        let scene = generate_scene(&cfg).unwrap();
        let a = make_correspondences(&scene, &NoiseSpec::iid(1.0), 7).unwrap();
        let b = make_correspondences(&scene, &NoiseSpec::iid(1.0), 7).unwrap();
        assert_eq!(a, b);
        let c = make_correspondences(&scene, &NoiseSpec::iid(1.0), 8).unwrap();
        assert_ne!(a.set, c.set);
    }

    #[test]
    fn zero_squash_is_coplanar() {
        let cfg = SimConfig {
            coplanar_squash: 0.0,
            ..small_cfg(300)
        };
        let scene = generate_scene(&cfg).unwrap();
        assert!(coplanarity_statistic(&scene.points3d).unwrap().abs() <= 1e-10);
    }

    #[test]
    fn coplanarity_statistic_cases() {
        let plane: Vec<_> = (0..20)
            .map(|i| Vector3::new((i as f64 * 0.3).sin(), (i as f64 * 0.7).cos(), 2.0))
            .collect();
        assert!(coplanarity_statistic(&plane).unwrap().abs() <= 1e-10);
        let scene = generate_scene(&small_cfg(300)).unwrap();
        assert!(coplanarity_statistic(&scene.points3d).unwrap() > 1e-4);
        assert!(coplanarity_statistic(&plane[..3]).is_err());
    }

    #[test]
    fn coplanarity_decreases_with_squash() {
        let stats: Vec<f64> = (0..10)
            .map(|i| {
                let cfg = SimConfig {
                    coplanar_squash: 1.0 - i as f64 / 9.0,
                    ..small_cfg(400)
                };
                coplanarity_statistic(&generate_scene(&cfg).unwrap().points3d).unwrap()
            })
            .collect();
        assert!(stats.windows(2).all(|w| w[1] < w[0]), "{stats:?}");
    }

    #[test]
    fn noise_free_pairs_satisfy_epipolar_constraint() {
        let scene = generate_scene(&small_cfg(500)).unwrap();
        let meas = make_correspondences(&scene, &NoiseSpec::none(), 1).unwrap();
        let e = *essential_from_pose(&meas.truth.rotation, &meas.truth.bearing).matrix() * scene.translation.norm();
        for c in &meas.set {
            assert!((c.z_h().transpose() * e * c.y_h())[0].abs() <= 1e-12);
        }
        for i in 0..meas.truth.len() {
            assert!((meas.truth.measurement(i).unwrap() - meas.set.items()[i].z).norm() <= 1e-12);
        }
    }

    #[test]
    fn iid_noise_has_requested_variance() {
        let scene = generate_scene(&SimConfig {
            point_count: 100_000,
            ..SimConfig::default()
        })
        .unwrap();
        let clean = make_correspondences(&scene, &NoiseSpec::none(), 3).unwrap();
        let noisy = make_correspondences(&scene, &NoiseSpec::iid(1.0), 3).unwrap();
        let f = scene.intrinsics.fx;
        let m = scene.len() as f64;
        let (mut vx, mut vy) = (0.0, 0.0);
        for (a, b) in clean.set.iter().zip(&noisy.set) {
            let d = (b.z - a.z) * f;
            vx += d.x * d.x;
            vy += d.y * d.y;
        }
        assert!((vx / m - 1.0).abs() < 0.03, "{}", vx / m);
        assert!((vy / m - 1.0).abs() < 0.03, "{}", vy / m);
    }

    #[test]
    fn outlier_count_is_binomial() {
        let scene = generate_scene(&SimConfig::default()).unwrap();
        for seed in 0..20 {
            let meas = make_correspondences(&scene, &NoiseSpec::iid(1.0).with_outliers(0.08), seed).unwrap();
            let count = meas.outlier_mask.iter().filter(|&&o| o).count();
            assert!((60..=100).contains(&count), "seed {seed}: {count}");
        }
    }

    #[test]
    fn per_point_noise_records_variances() {
        let scene = generate_scene(&small_cfg(200)).unwrap();
        let meas = make_correspondences(&scene, &NoiseSpec::per_point(0.5, 1.5), 2).unwrap();
        let f2 = scene.intrinsics.fx.powi(2);
        let v = meas.truth.point_sigma2.as_ref().unwrap();
        assert_eq!(v.len(), 200);
        assert!(v.iter().all(|s| (0.25 / f2 - 1e-18..=2.25 / f2 + 1e-18).contains(s)));
    }

    #[test]
    fn pixel_conversion() {
        let intr = CameraIntrinsics::default();
        assert_eq!(pixels_to_normalized(&Vector2::new(320.0, 240.0), &intr), Vector2::zeros());
        assert_eq!(pixels_to_normalized(&Vector2::new(1120.0, 240.0), &intr), Vector2::new(1.0, 0.0));
        let p = Vector2::new(12.345, 456.7);
        assert!((normalized_to_pixels(&pixels_to_normalized(&p, &intr), &intr) - p).norm() <= 1e-12);
    }

    #[test]
    fn impossible_pose_exhausts_budget() {
        let cfg = SimConfig {
            translation: [0.0, 0.0, -10.0],
            ..small_cfg(10)
        };
        assert!(matches!(generate_scene(&cfg), Err(Error::VisibilityExhausted { .. })));
    }
}
