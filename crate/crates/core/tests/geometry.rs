mod common;

use cecme::geom::{decompose_essential, essential_from_pose, exp_so3, select_by_cheirality};
use cecme::{Rotation, UnitBearing};
use common::scene;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_pose(rng: &mut ChaCha8Rng) -> (Rotation, UnitBearing) {
    let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let rotation = exp_so3(&(axis * rng.gen_range(0.0..3.0)));
    let t = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    (rotation, UnitBearing::normalize(t).unwrap())
}

#[test]
fn essential_round_trip_over_random_poses() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..500 {
        let (r, t) = random_pose(&mut rng);
        let e = essential_from_pose(&r, &t);
        let scale = rng.gen_range(0.1..10.0);
        let hyps = decompose_essential(&(e.matrix() * scale)).unwrap();
        let hit = hyps.iter().any(|h| {
            (h.rotation.matrix() - r.matrix()).norm() < 1e-8 && (h.bearing.vector() - t.vector()).norm() < 1e-8
        });
        assert!(hit, "pose not among hypotheses");
        for h in &hyps {
            let back = essential_from_pose(&h.rotation, &h.bearing);
            let same = (back.matrix() - e.matrix()).norm().min((back.matrix() + e.matrix()).norm());
            assert!(same < 1e-8);
        }
    }
}

#[test]
fn cheirality_picks_truth_on_generated_scenes() {
    for seed in 0..100 {
        let sc = scene(200, seed);
        let meas = cecme::synth::make_correspondences(&sc, &cecme::synth::NoiseSpec::none(), seed).unwrap();
        let truth = &meas.truth;
        let e = essential_from_pose(&truth.rotation, &truth.bearing);
        let pick = select_by_cheirality(&decompose_essential(e.matrix()).unwrap(), &meas.set).unwrap();
        assert!(pick.rotation.angle_to(&truth.rotation) < 1e-8, "seed {seed}");
        assert!((pick.bearing.vector() - truth.bearing.vector()).norm() < 1e-8, "seed {seed}");
    }
}
