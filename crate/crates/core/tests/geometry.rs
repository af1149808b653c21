use proptest::prelude::*;
use talkface_core::geometry::{compute_scale, extract_canonical, procrustes_align, retarget, retarget_sequence, RigidTransform};
use talkface_core::landmarks::{is_mouth, LandmarkSet, Point, NUM_LANDMARKS};
use talkface_core::synthetic::{mean_face, mouth_motion, synthetic_clip, SyntheticPerson};

fn random_set(coords: &[f64]) -> LandmarkSet {
    LandmarkSet::from_flat(coords).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn procrustes_recovers_rigid_motion(
        coords in prop::collection::vec(-50.0f64..50.0, 2 * NUM_LANDMARKS),
        angle in -3.1f64..3.1,
        tx in -40.0f64..40.0,
        ty in -40.0f64..40.0,
    ) {
        let x = random_set(&coords);
        let moved = RigidTransform::from_angle(angle, Point::new(tx, ty)).apply_set(&x);
        let back = procrustes_align(&moved, &x).unwrap();
        prop_assert!((back.rotation().determinant() - 1.0).abs() < 1e-9);
        for (a, b) in back.apply_set(&moved).points().iter().zip(x.points()) {
            prop_assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn translating_the_person_leaves_retargeted_motion_unchanged(
        open in 0.0f64..6.0,
        dx in -30.0f64..30.0,
        dy in -30.0f64..30.0,
        seed in 0u64..1000,
    ) {
        let person = SyntheticPerson::random(seed).pose(&mean_face());
        let shifted = person.translate(Point::new(dx, dy));
        let m = mean_face();
        let d = mouth_motion(open, 0.5 * open);
        let s = compute_scale(&person, &m).unwrap();
        let a = retarget(&d, s, &person, &m).unwrap().displacement_from(&person);
        let b = retarget(&d, s, &shifted, &m).unwrap().displacement_from(&shifted);
        for (p, q) in a.deltas().iter().zip(b.deltas()) {
            prop_assert!((p - q).norm() < 1e-9);
        }
    }
}

#[test]
fn known_rigid_transform_is_inverted() {
    let x = mean_face();
    let t = RigidTransform::from_angle(0.4, Point::new(3.0, -7.0));
    let est = procrustes_align(&t.apply_set(&x), &x).unwrap();
    let inv = t.inverse();
    assert!((est.angle() - inv.angle()).abs() < 1e-6);
    assert!((est.translation() - inv.translation()).norm() < 1e-6);
}

#[test]
fn anisotropic_stretch_scale() {
    let m = mean_face();
    let c = m.centroid();
    let stretched = m.map(|_, p| Point::new(c.x + 1.5 * (p.x - c.x), c.y + 0.8 * (p.y - c.y))).unwrap();
    let s = compute_scale(&stretched, &m).unwrap();
    assert!((s.sx - 1.5).abs() < 1e-12 && (s.sy - 0.8).abs() < 1e-12);
}

#[test]
fn extract_then_retarget_round_trips_synthetic_people() {
    let m = mean_face();
    for seed in 0..20 {
        let person = SyntheticPerson::random(seed);
        let neutral = person.face(&Default::default());
        let seq: Vec<_> = synthetic_clip(30, seed).displacements.iter().map(|d| person.face(d)).collect();
        let deltas = extract_canonical(&seq, &neutral, &m).unwrap();
        let scale = compute_scale(&neutral, &m).unwrap();
        let back = retarget_sequence(&deltas, scale, &neutral, &m).unwrap();
        for (a, b) in back.iter().zip(&seq) {
            for (p, q) in a.points().iter().zip(b.points()) {
                assert!((p - q).amax() < 1e-4);
            }
        }
    }
}

#[test]
fn mouth_motion_on_a_person_is_canonical_mouth_motion() {
    let m = mean_face();
    let person = SyntheticPerson::random(5);
    let neutral = person.face(&Default::default());
    let moving = person.face(&mouth_motion(4.0, 1.0));
    let d = &extract_canonical(&[moving], &neutral, &m).unwrap()[0];
    for i in 0..NUM_LANDMARKS {
        if !is_mouth(i) {
            assert!(d.delta(i).norm() < 1e-6, "landmark {i}");
        }
    }
    assert!(d.squared_norm() > 1.0);
}
