mod common;

use cecme::estimator::design::{bias_eliminated_spectrum, build_design, estimate_noise_variance, theta_from_essential, Spectrum};
use cecme::estimator::{
    cecme, consistent_initial_pose, gn_refine, ml_objective, residual_with_depth, pure_rotation_statistic, ransac_prefilter, EstimatorConfig,
};
use cecme::geom::{essential_from_pose, exp_so3};
use cecme::synth::{generate_scene, make_correspondences, NoiseSpec, SimConfig};
use cecme::{CorrespondenceSet, Error, SolverRegistry};
use common::*;
use nalgebra::Vector3;

#[test]
fn noise_free_recovery_is_exact() {
    for seed in 0..10 {
        let meas = make_correspondences(&scene(200, seed), &NoiseSpec::none(), seed).unwrap();
        let est = cecme(&meas.set, &EstimatorConfig::default()).unwrap();
        assert!(est.rotation.angle_to(&meas.truth.rotation) < 1e-6, "seed {seed}");
        assert!((est.bearing.vector() - meas.truth.bearing.vector()).norm() < 1e-6, "seed {seed}");
        assert!(est.sigma2_hat <= 1e-12);
        let init = consistent_initial_pose(&meas.set, &EstimatorConfig::default()).unwrap();
        assert!(init.rotation.angle_to(&meas.truth.rotation) < 1e-6);
        assert!(!init.used_fallback);
    }
}

#[test]
fn too_few_points() {
    let meas = make_correspondences(&scene(8, 0), &NoiseSpec::iid(1.0), 0).unwrap();
    assert_eq!(
        cecme(&meas.set, &EstimatorConfig::default()).unwrap_err(),
        Error::TooFewPoints { needed: 9, got: 8 }
    );
}

#[test]
fn initial_pose_is_close_for_most_seeds() {
    let cfg = synthetic_cfg();
    let close = (0..100)
        .filter(|&seed| {
            let meas = measure(1000, 1.0, seed);
            let init = consistent_initial_pose(&meas.set, &cfg).unwrap();
            init.rotation.angle_to(&meas.truth.rotation) < 0.05
                && init.bearing.vector().dot(meas.truth.bearing.vector()).clamp(-1.0, 1.0).acos() < 0.05
        })
        .count();
    assert!(close >= 95, "{close}/100");
}

#[test]
fn noise_variance_is_calibrated() {
    let truth = (1.0f64 / 800.0).powi(2);
    let estimates: Vec<f64> = (0..50)
        .map(|seed| estimate_noise_variance(&build_design(&measure(5000, 1.0, seed).set)).unwrap())
        .collect();
    let med = median(estimates);
    assert!((med / truth - 1.0).abs() < 0.15, "{med:e} vs {truth:e}");
}

#[test]
fn bias_elimination_beats_uncorrected_spectrum() {
    let wins = (0..200)
        .filter(|&seed| {
            let meas = measure(1000, 0.5, seed);
            let d = build_design(&meas.set);
            let truth = theta_from_essential(essential_from_pose(&meas.truth.rotation, &meas.truth.bearing).matrix()).normalize();
            let angle = |v: nalgebra::SVector<f64, 9>| v.dot(&truth).abs().min(1.0).acos();
            let corrected = bias_eliminated_spectrum(&d, estimate_noise_variance(&d).unwrap()).unwrap();
            let raw = Spectrum::of(&d.q).unwrap();
            angle(corrected.min_vector()) < angle(raw.min_vector())
        })
        .count();
    assert!(wins >= 160, "{wins}/200");
}

#[test]
fn bias_eliminated_residual_shrinks_with_m() {
    let medians: Vec<f64> = [100, 1000, 10000]
        .iter()
        .map(|&m| {
            median(
                (0..100)
                    .map(|seed| {
                        let meas = measure(m, 1.0, seed);
                        let d = build_design(&meas.set);
                        let s2 = estimate_noise_variance(&d).unwrap();
                        let e = essential_from_pose(&meas.truth.rotation, &meas.truth.bearing);
                        ((d.q - d.s * s2) * theta_from_essential(e.matrix())).norm()
                    })
                    .collect(),
            )
        })
        .collect();
    assert!(medians[0] > medians[1] && medians[1] > medians[2], "{medians:?}");
}

#[test]
fn one_step_reduces_objective() {
    let cfg = synthetic_cfg();
    let improved = (0..200)
        .filter(|&seed| {
            let meas = measure(1000, 1.0, seed);
            let est = cecme(&meas.set, &cfg).unwrap();
            est.objective_value < est.initial_objective_value
        })
        .count();
    assert!(improved >= 196, "{improved}/200");
}

#[test]
fn residuals_at_truth_follow_the_noise_level() {
    // With k at its true value the residual is the full 2-D noise; the
    // closed-form k absorbs the component along the epipolar line.
    let sigma2 = (1.0f64 / 800.0).powi(2);
    let meas = measure(10_000, 1.0, 4);
    let (r, b) = (meas.truth.rotation, meas.truth.bearing);
    let m = meas.set.len() as f64;
    let at_true_k = meas
        .set
        .iter()
        .enumerate()
        .map(|(i, c)| residual_with_depth(&r, &b, c, meas.truth.depth_ratio(i)).unwrap().norm_squared())
        .sum::<f64>()
        / m;
    assert!((at_true_k / (2.0 * sigma2) - 1.0).abs() < 0.10, "{}", at_true_k / (2.0 * sigma2));
    let profiled = ml_objective(&r, &b, &meas.set, None).unwrap();
    assert!((profiled / sigma2 - 1.0).abs() < 0.10, "{}", profiled / sigma2);

    let meas = measure(1000, 1.0, 3);
    let profiled = ml_objective(&meas.truth.rotation, &meas.truth.bearing, &meas.set, None).unwrap();
    assert!((profiled / sigma2 - 1.0).abs() < 0.15);
}

#[test]
fn perturbing_truth_increases_noise_free_objective() {
    let meas = make_correspondences(&scene(300, 1), &NoiseSpec::none(), 1).unwrap();
    let r = meas.truth.rotation;
    let b = meas.truth.bearing;
    assert!(ml_objective(&r, &b, &meas.set, None).unwrap() < 1e-20);
    let r2 = r * exp_so3(&Vector3::new(1e-3, -2e-3, 5e-4));
    assert!(ml_objective(&r2, &b, &meas.set, None).unwrap() > 1e-12);
    let b2 = cecme::UnitBearing::normalize(b.vector() + Vector3::new(0.0, 1e-3, 0.0)).unwrap();
    assert!(ml_objective(&r, &b2, &meas.set, None).unwrap() > 1e-14);
}

#[test]
fn extra_steps_change_little() {
    let mse = |iters: usize| -> f64 {
        let cfg = EstimatorConfig {
            gn_iterations: iters,
            ..synthetic_cfg()
        };
        (0..200)
            .map(|seed| {
                let meas = measure(1000, 1.0, seed);
                rotation_err(&cecme(&meas.set, &cfg).unwrap().rotation, &meas.truth.rotation)
            })
            .sum::<f64>()
            / 200.0
    };
    let (one, five) = (mse(1), mse(5));
    assert!(((five - one) / one).abs() < 0.1, "{one:e} {five:e}");
}

#[test]
fn gn_fixed_point_on_noise_free_data() {
    let meas = make_correspondences(&scene(100, 2), &NoiseSpec::none(), 2).unwrap();
    let out = gn_refine(&meas.truth.rotation, &meas.truth.bearing, &meas.set, &EstimatorConfig::default(), None);
    assert!(out.last_step_norm <= 1e-10);
}

#[test]
fn estimator_is_equivariant_to_second_frame_rotation() {
    let rp = exp_so3(&Vector3::new(0.05, -0.03, 0.04));
    let cfg = synthetic_cfg();
    for seed in 0..5 {
        let base = scene(1000, seed);
        let rotated = cecme::synth::SimScene {
            rotation: rp * base.rotation,
            translation: rp.matrix() * base.translation,
            ..base.clone()
        };
        let a = cecme(&make_correspondences(&base, &NoiseSpec::iid(0.5), seed).unwrap().set, &cfg).unwrap();
        let b = cecme(&make_correspondences(&rotated, &NoiseSpec::iid(0.5), seed).unwrap().set, &cfg).unwrap();
        assert!((rp * a.rotation).angle_to(&b.rotation) < 5e-3, "seed {seed}");
        assert!((rp.matrix() * a.bearing.vector() - b.bearing.vector()).norm() < 5e-2, "seed {seed}");
    }
}

#[test]
fn estimates_always_satisfy_invariants() {
    for (seed, sigma) in [(0, 0.1), (1, 2.0), (2, 8.0), (3, 20.0)] {
        let meas = measure(200, sigma, seed);
        if let Ok(est) = cecme(&meas.set, &EstimatorConfig::default()) {
            assert!(est.rotation.check().is_ok());
            assert!((est.bearing.vector().norm() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn initial_bias_decreases_with_m() {
    let cfg = synthetic_cfg();
    let bias = |m: usize| {
        let sc = scene(m, 11);
        let mut mean = nalgebra::Matrix3::zeros();
        let trials = 300;
        let mut truth = None;
        for seed in 0..trials {
            let meas = make_correspondences(&sc, &NoiseSpec::iid(1.0), seed).unwrap();
            mean += consistent_initial_pose(&meas.set, &cfg).unwrap().rotation.matrix();
            truth = Some(meas.truth.rotation);
        }
        mean /= trials as f64;
        (mean - truth.unwrap().matrix()).abs().sum()
    };
    let (small, large) = (bias(100), bias(10_000));
    assert!(large < small, "{small:e} {large:e}");
}

#[test]
fn coplanar_points_lower_the_degeneracy_ratio() {
    // At high signal-to-noise the ratio separates planar from generic scenes.
    let cfg = EstimatorConfig {
        enable_degeneracy_fallback: false,
        ..EstimatorConfig::default()
    };
    let ratio = |squash: f64, seed: u64| {
        let sc = generate_scene(&SimConfig {
            coplanar_squash: squash,
            seed,
            ..SimConfig::default()
        })
        .unwrap();
        let meas = make_correspondences(&sc, &NoiseSpec::iid(0.1), seed).unwrap();
        consistent_initial_pose(&meas.set, &cfg).unwrap().ratio
    };
    let generic = median((0..20).map(|s| ratio(1.0, s)).collect());
    let planar = median((0..20).map(|s| ratio(0.0, s)).collect());
    assert!(planar < generic, "planar {planar} generic {generic}");
}

#[test]
fn ransac_keeps_all_points_without_outliers() {
    let meas = measure(1000, 1.0, 5);
    let sigma = 1.0 / 800.0;
    let cfg = EstimatorConfig {
        ransac: cecme::estimator::RansacConfig {
            inlier_threshold_normalized: 10.0 * sigma,
            ..Default::default()
        },
        ..EstimatorConfig::default()
    };
    let out = ransac_prefilter(&meas.set, &cfg).unwrap();
    assert!(out.inlier_mask.iter().all(|&b| b));
    assert_eq!(ransac_prefilter(&meas.set, &cfg).unwrap(), out);
}

#[test]
fn ransac_rejects_too_small_sets() {
    let set = CorrespondenceSet::new(measure(20, 1.0, 0).set.items()[..5].to_vec()).unwrap();
    assert!(matches!(ransac_prefilter(&set, &EstimatorConfig::default()), Err(Error::TooFewPoints { .. })));
}

#[test]
fn robust_pipeline_tolerates_outliers() {
    let cfg = EstimatorConfig {
        enable_degeneracy_fallback: false,
        ..EstimatorConfig::robust()
    };
    let mse = |rate: f64| {
        let sc = scene(1000, 21);
        (0..100)
            .map(|seed| {
                let meas = make_correspondences(&sc, &NoiseSpec::iid(1.0).with_outliers(rate), seed).unwrap();
                rotation_err(&cecme(&meas.set, &cfg).unwrap().rotation, &meas.truth.rotation)
            })
            .sum::<f64>()
            / 100.0
    };
    let (clean, dirty) = (mse(0.0), mse(0.08));
    assert!(dirty <= 3.0 * clean, "{clean:e} {dirty:e}");
}

#[test]
fn pure_rotation_statistic_tracks_baseline() {
    let base = scene(1000, 4);
    let mut last = -1.0;
    for cm in [0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0] {
        let t = Vector3::new(1.0, 1.0, 1.0).normalize() * cm / 100.0;
        let sc = base.with_translation(t);
        let noise = if cm == 0.0 { NoiseSpec::none() } else { NoiseSpec::iid(0.5) };
        let meas = make_correspondences(&sc, &noise, 4).unwrap();
        let stat = pure_rotation_statistic(&meas.truth.rotation, &meas.set);
        if cm == 0.0 {
            assert!(stat < 1e-12);
        }
        assert!(stat > last, "{cm} cm: {stat}");
        last = stat;
    }
}

#[test]
fn pure_rotation_statistic_ignores_translation_scale() {
    // Rescaling t together with the depths leaves the images unchanged.
    let base = scene(300, 6);
    let scaled = cecme::synth::SimScene {
        points3d: base.points3d.iter().map(|x| x * 3.0).collect(),
        translation: base.translation * 3.0,
        ..base.clone()
    };
    let a = make_correspondences(&base, &NoiseSpec::iid(0.5), 1).unwrap();
    let b = make_correspondences(&scaled, &NoiseSpec::iid(0.5), 1).unwrap();
    let sa = pure_rotation_statistic(&a.truth.rotation, &a.set);
    let sb = pure_rotation_statistic(&b.truth.rotation, &b.set);
    assert!((sa - sb).abs() <= 1e-12 * sa);
}

#[test]
fn registry_solvers_agree_on_clean_data() {
    let meas = make_correspondences(&scene(300, 9), &NoiseSpec::none(), 9).unwrap();
    let registry = SolverRegistry::with_builtins();
    for name in registry.names() {
        let est = registry.get(name).unwrap().estimate(&meas.set, &EstimatorConfig::default()).unwrap();
        assert!(est.rotation.angle_to(&meas.truth.rotation) < 1e-6, "{name}");
    }
}
