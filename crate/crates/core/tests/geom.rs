use headbench::geom::{
    estimate_pose, hanning_window, head_motion_score, plan_crops, rotation_from_euler,
    smooth_sequence, BoundaryPolicy, CanonicalFace, CropConfig, LandmarkSequence, PoseAxis,
    PoseTrace, RegistrationMode, SmoothingConfig,
};
use nalgebra::Vector3;
use proptest::prelude::*;

/// Weighted average written straight from the definition, with explicit
/// index folding at the ends.
fn naive_smooth(x: &[f64], n: usize, policy: BoundaryPolicy) -> Vec<f64> {
    let half = (n / 2) as isize;
    let w: Vec<f64> = if n == 1 {
        vec![1.0]
    } else {
        (0..n)
            .map(|j| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * j as f64 / (n - 1) as f64).cos())
            .collect()
    };
    let len = x.len() as isize;
    let fold = |mut k: isize| -> usize {
        match policy {
            BoundaryPolicy::Clamp => k.clamp(0, len - 1) as usize,
            BoundaryPolicy::Reflect => {
                if len == 1 {
                    return 0;
                }
                let period = 2 * (len - 1);
                k = k.rem_euclid(period);
                if k >= len {
                    k = period - k;
                }
                k as usize
            }
        }
    };
    (0..len)
        .map(|i| {
            let mut num = 0.0;
            let mut den = 0.0;
            for j in 0..n as isize {
                let wj = w[j as usize];
                num += wj * x[fold(i + j - half)];
                den += wj;
            }
            num / den
        })
        .collect()
}

#[test]
fn window_values() {
    assert_eq!(hanning_window(3).unwrap(), vec![0.0, 1.0, 0.0]);
    assert_eq!(hanning_window(1).unwrap(), vec![1.0]);
    let w = hanning_window(11).unwrap();
    assert_eq!(w[5], 1.0);
    for j in 0..11 {
        assert!((w[j] - w[10 - j]).abs() < 1e-15);
    }
}

#[test]
fn constants_survive_exactly() {
    for n in [1, 3, 5, 11, 21] {
        for policy in [BoundaryPolicy::Reflect, BoundaryPolicy::Clamp] {
            let cfg = SmoothingConfig::new(n, policy).unwrap();
            let x = vec![0.1 + 0.2; 17];
            assert_eq!(smooth_sequence(&x, &cfg).unwrap(), x);
        }
    }
}

fn policy() -> impl Strategy<Value = BoundaryPolicy> {
    prop_oneof![Just(BoundaryPolicy::Reflect), Just(BoundaryPolicy::Clamp)]
}

proptest! {
    #[test]
    fn smoothing_matches_direct_sum(
        x in prop::collection::vec(-100.0f64..100.0, 1..60),
        half in 0usize..8,
        policy in policy(),
    ) {
        let n = 2 * half + 1;
        let cfg = SmoothingConfig::new(n, policy).unwrap();
        let got = smooth_sequence(&x, &cfg).unwrap();
        let want = naive_smooth(&x, n, policy);
        prop_assert_eq!(got.len(), x.len());
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-10, "{} vs {}", g, w);
        }
    }

    #[test]
    fn smoothing_is_linear(
        pair in (1usize..40).prop_flat_map(|len| (
            prop::collection::vec(-10.0f64..10.0, len),
            prop::collection::vec(-10.0f64..10.0, len),
        )),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        policy in policy(),
    ) {
        let (x, y) = pair;
        let cfg = SmoothingConfig::new(11, policy).unwrap();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let lhs = smooth_sequence(&mix, &cfg).unwrap();
        let sx = smooth_sequence(&x, &cfg).unwrap();
        let sy = smooth_sequence(&y, &cfg).unwrap();
        for i in 0..x.len() {
            prop_assert!((lhs[i] - (a * sx[i] + b * sy[i])).abs() <= 1e-10);
        }
    }

    #[test]
    fn smoothed_crop_path_is_no_rougher(
        jitter in prop::collection::vec((-6.0f64..6.0, -6.0f64..6.0), 2..40),
    ) {
        let canon = CanonicalFace::bundled().points();
        let frames: Vec<Vec<[f64; 2]>> = jitter
            .iter()
            .map(|(dx, dy)| canon.iter().map(|p| [200.0 + 0.4 * p[0] + dx, 200.0 + 0.4 * p[1] + dy]).collect())
            .collect();
        let lms = LandmarkSequence::from_2d(frames, 25.0).unwrap();
        let smoothing = SmoothingConfig::new(11, BoundaryPolicy::Clamp).unwrap();
        let plan = plan_crops(&lms, &CropConfig::default(), &smoothing).unwrap();
        let tv = |pts: &[[f64; 2]], k: usize| pts.windows(2).map(|w| (w[1][k] - w[0][k]).abs()).sum::<f64>();
        for k in 0..2 {
            prop_assert!(tv(&plan.smoothed_centers, k) <= tv(&plan.raw_centers, k) + 1e-9);
        }
        let sides: Vec<i64> = plan.rects.iter().map(|r| r.side).collect();
        prop_assert!(sides.windows(2).all(|w| w[0] == w[1]));
    }
}

#[test]
fn crop_corner_and_side_from_face_length() {
    // A face whose bounding box is 90 px tall and 60 px wide, eyes at (130, 110).
    let mut pts = vec![[130.0, 110.0]; 68];
    pts[0] = [100.0, 110.0];
    pts[16] = [160.0, 110.0];
    pts[8] = [130.0, 170.0];
    pts[19] = [130.0, 80.0];
    let lms = LandmarkSequence::from_2d(vec![pts; 5], 25.0).unwrap();
    let plan = plan_crops(&lms, &CropConfig::default(), &SmoothingConfig::default()).unwrap();
    assert_eq!(plan.face_length, 90.0);
    assert!((plan.side - 90.0 * 41.0 / 18.0).abs() < 1e-12);
    let c = plan.corners[2];
    assert!((c[0] - (130.0 - 100.0)).abs() < 1e-9);
    assert!((c[1] - (110.0 - 80.0)).abs() < 1e-9);
}

fn posed(pitch: f64, yaw: f64, roll: f64, scale: f64, shift: [f64; 3]) -> Vec<[f64; 3]> {
    let r = rotation_from_euler(pitch, yaw, roll);
    CanonicalFace::bundled()
        .points()
        .iter()
        .map(|p| {
            let q = r * Vector3::from(*p) * scale;
            [q.x + shift[0], q.y + shift[1], q.z + shift[2]]
        })
        .collect()
}

#[test]
fn rotations_are_recovered() {
    let canon = CanonicalFace::bundled();
    for (p, y, r) in [(0.0, 15.0, 0.0), (5.0, -30.0, 2.0), (-12.0, 60.0, -8.0)] {
        let lms = posed(p, y, r, 1.7, [320.0, 240.0, 15.0]);
        let pose = estimate_pose(&lms, &canon, RegistrationMode::WithScale).unwrap();
        assert!((pose.pitch - p).abs() < 1e-6, "pitch {} vs {p}", pose.pitch);
        assert!((pose.yaw - y).abs() < 1e-6, "yaw {} vs {y}", pose.yaw);
        assert!((pose.roll - r).abs() < 1e-6, "roll {} vs {r}", pose.roll);
        assert!((pose.scale - 1.7).abs() < 1e-9);
        assert!(pose.residual < 1e-9);
    }
}

#[test]
fn rigid_mode_on_unit_scale() {
    let canon = CanonicalFace::bundled();
    let lms = posed(3.0, -20.0, 1.0, 1.0, [0.0; 3]);
    let pose = estimate_pose(&lms, &canon, RegistrationMode::RigidOnly).unwrap();
    assert!((pose.yaw + 20.0).abs() < 1e-6);
}

#[test]
fn motion_score_is_spread() {
    let trace = PoseTrace::from_angles(vec![[0.0, -10.0, 0.0], [0.0, 5.0, 0.0], [0.0, 20.0, 0.0]]);
    assert_eq!(head_motion_score(&trace, PoseAxis::Yaw), 30.0);
    assert_eq!(head_motion_score(&trace, PoseAxis::Pitch), 0.0);
}
