mod common;

use common::{brute_force_rank_sum_p, brute_force_u};
use proptest::prelude::*;
use signkit_core::diagnostics::{
    presence_histogram, rank_sum_with_method, wilcoxon_rank_sum, PresenceGroups, RankSumMethod,
};
use signkit_core::Rng;

/// Values drawn from a small grid so ties are common.
fn tied_values(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0u8..8).prop_map(|v| v as f64 * 0.5), 1..=max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn exact_matches_permutation_enumeration(a in tied_values(6), b in tied_values(6)) {
        let r = wilcoxon_rank_sum(&a, &b).unwrap();
        prop_assert_eq!(r.method, RankSumMethod::Exact);
        let brute = brute_force_rank_sum_p(&a, &b);
        prop_assert!((r.p_value - brute).abs() < 1e-12, "{} vs {}", r.p_value, brute);
        prop_assert!((r.u_statistic - brute_force_u(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn strictly_increasing_transform_changes_nothing(
        a in tied_values(12),
        b in tied_values(12),
    ) {
        let f = |v: &f64| (v * 0.7).exp() + v.powi(3);
        let (fa, fb): (Vec<f64>, Vec<f64>) = (a.iter().map(f).collect(), b.iter().map(f).collect());
        let r = wilcoxon_rank_sum(&a, &b).unwrap();
        let s = wilcoxon_rank_sum(&fa, &fb).unwrap();
        prop_assert_eq!(r.u_statistic, s.u_statistic);
        prop_assert_eq!(r.p_value, s.p_value);
        prop_assert_eq!(r.method, s.method);
    }

    #[test]
    fn swapping_groups_mirrors_u(a in tied_values(14), b in tied_values(14)) {
        let r = wilcoxon_rank_sum(&a, &b).unwrap();
        let s = wilcoxon_rank_sum(&b, &a).unwrap();
        let nm = (a.len() * b.len()) as f64;
        prop_assert!((s.u_statistic - (nm - r.u_statistic)).abs() < 1e-12);
        prop_assert!((s.p_value - r.p_value).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&r.p_value));
    }

    #[test]
    fn histogram_partitions_each_group(
        correct in prop::collection::vec(0.0f64..=1.0, 0..40),
        incorrect in prop::collection::vec(0.0f64..=1.0, 0..40),
        bins in 1usize..=100,
    ) {
        let groups = PresenceGroups { correct: correct.clone(), incorrect: incorrect.clone() };
        let h = presence_histogram(&groups, bins);
        prop_assert_eq!(h.len(), bins);
        prop_assert_eq!(h.iter().map(|b| b.count_correct).sum::<usize>(), correct.len());
        prop_assert_eq!(h.iter().map(|b| b.count_incorrect).sum::<usize>(), incorrect.len());
        prop_assert_eq!(h[0].bin_low, 0.0);
        prop_assert_eq!(h[bins - 1].bin_high, 1.0);
    }
}

#[test]
fn normal_approximation_tracks_exact_at_size_eight() {
    let mut rng = Rng::new(8);
    for _ in 0..100 {
        let a: Vec<f64> = (0..8).map(|_| rng.normal()).collect();
        let b: Vec<f64> = (0..8).map(|_| rng.normal() + 0.5).collect();
        let exact = rank_sum_with_method(&a, &b, RankSumMethod::Exact).unwrap();
        let approx = rank_sum_with_method(&a, &b, RankSumMethod::NormalApprox).unwrap();
        assert!(
            (exact.p_value - approx.p_value).abs() < 0.02,
            "exact {} approx {}",
            exact.p_value,
            approx.p_value
        );
    }
}

#[test]
fn two_against_two_is_one_third() {
    let r = wilcoxon_rank_sum(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
    assert_eq!(r.p_value, 1.0 / 3.0);
}
