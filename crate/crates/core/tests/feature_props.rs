mod common;

use common::random_holistic75;
use proptest::prelude::*;
use signkit_core::features::{
    flip_horizontal, frame_features, hand_presence, limb_features, normalize_pose, Hand,
    NormalizationSpec,
};
use signkit_core::pose::{PoseSequence, SkeletonLayout, BODY};
use signkit_core::Rng;
use std::f64::consts::{PI, TAU};

fn coord_bits(p: &PoseSequence) -> Vec<u32> {
    p.body().coordinates().iter().map(|v| v.to_bits()).collect()
}

/// Signed angular difference folded into (-π, π].
fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn flip_is_an_involution(seed in any::<u64>(), frames in 1usize..6) {
        let p = random_holistic75(&mut Rng::new(seed), frames);
        let mirror = SkeletonLayout::holistic75().mirror;
        let back = flip_horizontal(&flip_horizontal(&p, &mirror).unwrap(), &mirror).unwrap();
        prop_assert_eq!(coord_bits(&back), coord_bits(&p));
        prop_assert_eq!(back, p);
    }

    #[test]
    fn limb_angles_rotate_with_the_pose(seed in any::<u64>(), theta in -10.0f64..10.0) {
        let mut rng = Rng::new(seed);
        let n = 2 + rng.below(10);
        let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.uniform_range(-3.0, 3.0), rng.uniform_range(-3.0, 3.0)]).collect();
        let present: Vec<bool> = (0..n).map(|_| rng.bernoulli(0.8)).collect();
        let limbs: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        let (s, c) = theta.sin_cos();
        let rotated: Vec<[f64; 2]> = pts.iter().map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]]).collect();
        let before = limb_features(&pts, &present, &limbs);
        let after = limb_features(&rotated, &present, &limbs);
        for (i, (b, a)) in before.iter().zip(&after).enumerate() {
            let (x, y) = limbs[i];
            if present[x] && present[y] {
                prop_assert!(angle_gap(a.angle, b.angle + theta).abs() < 1e-9);
                prop_assert!((a.length - b.length).abs() < 1e-9);
            } else {
                prop_assert_eq!((a.angle, a.length), (0.0, 0.0));
            }
        }
    }

    #[test]
    fn flipped_features_are_a_signed_permutation(seed in any::<u64>(), frames in 1usize..4) {
        let layout = SkeletonLayout::holistic75();
        let p = random_holistic75(&mut Rng::new(seed), frames);
        let f = frame_features(&p);
        let g = frame_features(&flip_horizontal(&p, &layout.mirror).unwrap());
        let perm = layout.mirror.permutation(p.header()).unwrap();
        let limbs = p.header().global_limbs();
        let k = perm.len();
        for t in 0..frames {
            for (dst, &src) in perm.iter().enumerate() {
                prop_assert_eq!(g.get(t, 2 * dst), -f.get(t, 2 * src));
                prop_assert_eq!(g.get(t, 2 * dst + 1), f.get(t, 2 * src + 1));
            }
            for (i, &(a, b)) in limbs.iter().enumerate() {
                let (sa, sb) = (perm[a], perm[b]);
                let (j, reversed) = limbs
                    .iter()
                    .position(|&l| l == (sa, sb))
                    .map(|j| (j, false))
                    .or_else(|| limbs.iter().position(|&l| l == (sb, sa)).map(|j| (j, true)))
                    .expect("limb set is closed under mirroring");
                let (ang_g, len_g) = (g.get(t, 2 * k + 2 * i), g.get(t, 2 * k + 2 * i + 1));
                let (ang_f, len_f) = (f.get(t, 2 * k + 2 * j), f.get(t, 2 * k + 2 * j + 1));
                prop_assert_eq!(len_g, len_f);
                if len_f == 0.0 {
                    continue;
                }
                let expected = if reversed { -ang_f } else { PI - ang_f };
                prop_assert!(angle_gap(ang_g, expected).abs() < 1e-12, "{} vs {}", ang_g, expected);
            }
        }
    }

    #[test]
    fn presence_survives_flip_and_normalization(seed in any::<u64>(), frames in 1usize..8) {
        let mirror = SkeletonLayout::holistic75().mirror;
        let p = random_holistic75(&mut Rng::new(seed), frames);
        let f = flip_horizontal(&p, &mirror).unwrap();
        prop_assert_eq!(hand_presence(&f, Hand::Left).unwrap(), hand_presence(&p, Hand::Right).unwrap());
        prop_assert_eq!(hand_presence(&f, Hand::Right).unwrap(), hand_presence(&p, Hand::Left).unwrap());
        if let Ok(n) = normalize_pose(&p, &NormalizationSpec::default()) {
            for h in [Hand::Left, Hand::Right] {
                prop_assert_eq!(hand_presence(&n, h).unwrap(), hand_presence(&p, h).unwrap());
            }
        }
    }

    #[test]
    fn normalized_anchors_sit_at_the_target_distance(seed in any::<u64>(), target in 0.1f64..10.0) {
        let p = random_holistic75(&mut Rng::new(seed), 6);
        let spec = NormalizationSpec { target_distance: target, ..NormalizationSpec::default() };
        let Ok(n) = normalize_pose(&p, &spec) else { return Ok(()) };
        let (body, _) = p.component_slice(BODY).unwrap();
        let (a, b) = (body + 11, body + 12);
        for t in 0..p.frame_count() {
            if !(p.body().is_present(t, a) && p.body().is_present(t, b)) {
                continue;
            }
            let raw = |q: &PoseSequence, i: usize| {
                let xy = q.body().point(t, i);
                [xy[0] as f64, xy[1] as f64]
            };
            let (pa, pb) = (raw(&p, a), raw(&p, b));
            if (pa[0] - pb[0]).hypot(pa[1] - pb[1]) < 1e-3 {
                continue;
            }
            let (na, nb) = (raw(&n, a), raw(&n, b));
            let d = (na[0] - nb[0]).hypot(na[1] - nb[1]);
            // Normalized poses are stored as f32, so agreement is bounded by
            // single-precision rounding of the anchor coordinates.
            prop_assert!((d - target).abs() <= 4.0 * f32::EPSILON as f64 * target, "{} vs {}", d, target);
            prop_assert!((na[0] + nb[0]).abs() < 1e-6 * target && (na[1] + nb[1]).abs() < 1e-6 * target);
        }
    }
}
