use proptest::prelude::*;

use vista_core::augment::{augment_dataset, augment_frame, AugmentConfig, FrameInput};
use vista_core::dataset::Dataset;
use vista_core::filter::{perceptual_distance, FilterParams};
use vista_core::geometry::{
    deproject, project, relative_pose, CameraPose, Intrinsics, Pixel, RigidTransform, Vec3,
};
use vista_core::imaging::{Mask, RgbImage};
use vista_core::nvs::{inpaint_pullpush, OracleBackend};
use vista_core::policy::{FeatureConfig, KnnPolicy};
use vista_core::posesample::{sample_arc, sample_perturbation, ArcParams, PerturbationParams};
use vista_core::rng::SeededRng;
use vista_core::scenesim::{default_camera, gen_demos, observe, reset, DemoConfig, ROBOT_BASE};

fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn transform() -> impl Strategy<Value = RigidTransform> {
    (vec3(1.0), -3.1..3.1f64, vec3(5.0)).prop_filter_map("zero axis", |(axis, angle, t)| {
        (axis.norm() > 1e-3).then(|| {
            let r = RigidTransform::from_axis_angle(axis, angle);
            RigidTransform::new(*r.rotation(), t).unwrap()
        })
    })
}

fn image(w: u32, h: u32) -> impl Strategy<Value = RgbImage> {
    proptest::collection::vec(any::<u8>(), (w * h * 3) as usize)
        .prop_map(move |v| RgbImage::from_raw(w, h, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn compose_is_associative(a in transform(), b in transform(), c in transform()) {
        let l = a.compose(&b).compose(&c);
        let r = a.compose(&b.compose(&c));
        prop_assert!(l.max_abs_diff(&r) < 1e-9);
    }

    #[test]
    fn inverse_cancels(a in transform(), p in vec3(3.0)) {
        prop_assert!(a.compose(&a.inverse()).max_abs_diff(&RigidTransform::identity()) < 1e-9);
        prop_assert!((a.inverse().apply(&a.apply(&p)) - p).norm() < 1e-9);
    }

    #[test]
    fn compose_applies_right_first(a in transform(), b in transform(), p in vec3(3.0)) {
        prop_assert!((a.compose(&b).apply(&p) - a.apply(&b.apply(&p))).norm() < 1e-9);
    }

    #[test]
    fn row_major_round_trip(a in transform()) {
        let back = RigidTransform::from_row_major(&a.to_row_major()).unwrap();
        prop_assert!(back.max_abs_diff(&a) < 1e-12);
    }

    #[test]
    fn relative_pose_is_target_from_context(a in transform(), b in transform()) {
        let (ctx, tgt) = (CameraPose::new(a), CameraPose::new(b));
        let rel = relative_pose(&ctx, &tgt);
        prop_assert!(b.compose(&rel).max_abs_diff(&a) < 1e-9);
    }

    #[test]
    fn deproject_then_project(
        u in 0.0..64.0f64, v in 0.0..48.0f64, depth in 0.05..20.0f64, fov in 10.0..150.0f64,
    ) {
        let intr = Intrinsics::new(fov, 64, 48).unwrap();
        let p = deproject(Pixel::new(u, v), depth, &intr).unwrap();
        prop_assert!((p.z + depth).abs() < 1e-9);
        let px = project(&p, &intr).unwrap();
        prop_assert!((px.u - u).abs() < 1e-9 && (px.v - v).abs() < 1e-9);
    }

    #[test]
    fn perturbation_moves_only_by_the_drawn_offset(seed in any::<u64>(), a in transform()) {
        let pose = CameraPose::new(a);
        let zero = PerturbationParams { sigma_t: 0.0, sigma_r: 0.0 };
        prop_assert_eq!(sample_perturbation(&pose, &zero, &mut SeededRng::new(seed)), pose);
        let p = PerturbationParams::standard();
        let x = sample_perturbation(&pose, &p, &mut SeededRng::new(seed));
        let y = sample_perturbation(&pose, &p, &mut SeededRng::new(seed));
        prop_assert_eq!(x, y);
        prop_assert!(x.world_from_camera.rotation().determinant() > 0.0);
    }

    #[test]
    fn arc_keeps_height_and_aims_at_center(seed in any::<u64>(), span in 0.0..360.0f64) {
        let init = default_camera();
        let center = Vec3::from(ROBOT_BASE);
        let params = ArcParams { azimuth_span_deg: span.max(1e-3), ..ArcParams::quarter_circle(center) };
        let pose = sample_arc(&init, &params, &mut SeededRng::new(seed)).unwrap();
        prop_assert!((pose.position().z - init.position().z).abs() < 1e-9);
        let to_center = (center - pose.position()).normalize();
        prop_assert!((pose.forward() - to_center).norm() < 1e-9);
        let r0 = (init.position() - center).norm();
        prop_assert!(((pose.position() - center).norm() - r0).abs() <= 8.0 * params.sigma_radius);
    }

    #[test]
    fn derived_streams_are_reproducible(m in any::<u64>(), t in 0u64..1000, c in 0u64..8, k in 1u64..6) {
        let mut a = SeededRng::derive(m, 3, t, c, k);
        let mut b = SeededRng::derive(m, 3, t, c, k);
        let mut other = SeededRng::derive(m, 3, t, c, k + 1);
        let (x, y) = (a.next_u64(), b.next_u64());
        prop_assert_eq!(x, y);
        prop_assert_ne!(x, other.next_u64());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn distance_is_symmetric_bounded_and_zero_on_self(a in image(24, 20), b in image(24, 20)) {
        let d = perceptual_distance(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!((d - perceptual_distance(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!(perceptual_distance(&a, &a).unwrap().abs() < 1e-12);
    }

    #[test]
    fn inpainting_keeps_valid_pixels(img in image(17, 13), bits in proptest::collection::vec(any::<bool>(), 17 * 13)) {
        let mut mask = Mask::new(17, 13, false);
        for (i, b) in bits.iter().enumerate() {
            mask.set(i as u32 % 17, i as u32 / 17, *b);
        }
        let out = inpaint_pullpush(&img, &mask);
        for y in 0..13 {
            for x in 0..17 {
                if mask.get(x, y) {
                    prop_assert_eq!(out.get_pixel(x, y), img.get_pixel(x, y));
                }
            }
        }
    }

    #[test]
    fn policy_bytes_round_trip(
        rows in proptest::collection::vec((proptest::collection::vec(-1.0f32..1.0, 48), -0.02f32..0.02), 1..12),
        k in 1usize..4,
    ) {
        let config = FeatureConfig { feat_size: 4, ..FeatureConfig::default() };
        let samples: Vec<_> = rows.into_iter().map(|(f, a)| (f, [a, -a, a, 1.0])).collect();
        let k = k.min(samples.len());
        let intr = Intrinsics::new(45.0, 32, 32).unwrap();
        let p = KnnPolicy::from_samples(samples, config, k, default_camera().world_from_camera, intr).unwrap();
        let q = KnnPolicy::from_bytes(&p.to_bytes()).unwrap();
        prop_assert_eq!(q.to_bytes(), p.to_bytes());
        prop_assert_eq!(q.len(), p.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn frame_augmentation_is_deterministic(seed in any::<u64>(), reset_seed in 0u64..50, t in 0usize..40) {
        let intr = Intrinsics::new(45.0, 40, 40).unwrap();
        let cam = default_camera();
        let state = reset(reset_seed);
        let obs = observe(&state, &cam, &intr, false);
        let input = FrameInput { rgb: &obs.third_person_rgb, context: cam, intr, state: Some(&state) };
        let cfg = AugmentConfig { backend: "oracle".into(), seed, ..AugmentConfig::default() };
        let a = augment_frame(&input, &OracleBackend, &cfg, 2, t, 0).unwrap();
        let b = augment_frame(&input, &OracleBackend, &cfg, 2, t, 0).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.provenance.attempts >= 1 && a.provenance.attempts <= cfg.filter.max_tries);
        if a.provenance.accepted {
            prop_assert!(a.provenance.distance < cfg.filter.eta);
        } else {
            prop_assert_eq!(&a.rgb, &obs.third_person_rgb);
        }

        let never = AugmentConfig { filter: FilterParams { eta: 0.0, max_tries: 2 }, ..cfg };
        let f = augment_frame(&input, &OracleBackend, &never, 2, t, 0).unwrap();
        prop_assert!(!f.provenance.accepted);
        prop_assert_eq!(&f.rgb, &obs.third_person_rgb);
        prop_assert_eq!(f.pose, cam);
    }
}

#[test]
fn augmentation_preserves_labels_and_ignores_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DemoConfig {
        n: 3,
        seed: 4,
        camera: default_camera(),
        intrinsics: Intrinsics::new(45.0, 32, 32).unwrap(),
        wrist: false,
    };
    let src = gen_demos(&cfg, &dir.path().join("src"), false).unwrap();
    let aug = AugmentConfig {
        backend: "oracle".into(),
        copies: 2,
        keep_original: true,
        seed: 9,
        ..AugmentConfig::default()
    };
    let one = augment_dataset(&src, &aug, &dir.path().join("a"), false, Some(1)).unwrap();
    let many = augment_dataset(&src, &aug, &dir.path().join("b"), false, Some(4)).unwrap();
    assert_eq!(one.num_trajectories(), 9);
    for i in 0..one.num_trajectories() {
        let source = i % src.num_trajectories();
        let copy = i / src.num_trajectories();
        let actions = one.load_actions(i).unwrap();
        assert_eq!(actions, src.load_actions(source).unwrap(), "traj {i}");
        let a = one.load_trajectory(i).unwrap();
        let b = many.load_trajectory(i).unwrap();
        assert_eq!(a.frames, b.frames);
        if copy == 0 {
            assert_eq!(a.frames, src.load_trajectory(source).unwrap().frames);
        }
    }
    assert_eq!(
        Dataset::open(&dir.path().join("a")).unwrap().manifest(),
        Dataset::open(&dir.path().join("b")).unwrap().manifest()
    );
}
