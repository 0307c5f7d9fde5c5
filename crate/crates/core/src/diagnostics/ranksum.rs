use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

/// Largest group size for which the exact null distribution is enumerated.
pub const EXACT_MAX_GROUP: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankSumError {
    #[error("rank-sum test needs two nonempty groups (sizes {a} and {b})")]
    EmptyGroup { a: usize, b: usize },
    #[error("non-finite value in group {group}")]
    NonFinite { group: char },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankSumMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSumResult {
    /// Mann-Whitney U of group `a`: the number of pairs with `a > b`, ties counting one half.
    pub u_statistic: f64,
    /// Continuity-corrected normal score of `U`; zero when all values tie.
    pub z_score: f64,
    /// Two-sided.
    pub p_value: f64,
    pub method: RankSumMethod,
    pub mean_a: f64,
    pub mean_b: f64,
}

/// Two-sided Wilcoxon rank-sum test with midranks for ties.
///
/// The exact permutation null is used when both groups have at most
/// [`EXACT_MAX_GROUP`] values, the tie-corrected normal approximation with
/// continuity correction otherwise.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<RankSumResult, RankSumError> {
    let method = if a.len().max(b.len()) <= EXACT_MAX_GROUP {
        RankSumMethod::Exact
    } else {
        RankSumMethod::NormalApprox
    };
    rank_sum_with_method(a, b, method)
}

/// [`wilcoxon_rank_sum`] with the method forced.
///
/// The exact method enumerates subsets through a counting recursion, so it
/// remains usable (if slow) well beyond the default threshold.
pub fn rank_sum_with_method(
    a: &[f64],
    b: &[f64],
    method: RankSumMethod,
) -> Result<RankSumResult, RankSumError> {
    if a.is_empty() || b.is_empty() {
        return Err(RankSumError::EmptyGroup { a: a.len(), b: b.len() });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(RankSumError::NonFinite { group: 'a' });
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(RankSumError::NonFinite { group: 'b' });
    }
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (doubled, tie_sizes) = doubled_midranks(&pooled);

    // Work in doubled ranks so midranks stay integral.
    let rank_sum2: u64 = doubled[..na].iter().sum();
    let u = rank_sum2 as f64 / 2.0 - (na * (na + 1)) as f64 / 2.0;
    let mean_u = (na * nb) as f64 / 2.0;

    let tie_term: f64 = tie_sizes.iter().map(|&t| (t * t * t - t) as f64).sum();
    let var_u = (na * nb) as f64 / 12.0 * ((n + 1) as f64 - tie_term / (n * (n - 1)).max(1) as f64);
    let z_score = if var_u > 0.0 {
        let dev = u - mean_u;
        let corrected = (dev.abs() - 0.5).max(0.0);
        corrected.copysign(dev) / var_u.sqrt()
    } else {
        0.0
    };

    let p_value = match method {
        RankSumMethod::Exact => exact_two_sided(&doubled, na, rank_sum2),
        RankSumMethod::NormalApprox => {
            if var_u > 0.0 {
                erfc(z_score.abs() / std::f64::consts::SQRT_2).min(1.0)
            } else {
                1.0
            }
        }
    };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(RankSumResult {
        u_statistic: u,
        z_score,
        p_value,
        method,
        mean_a: mean(a),
        mean_b: mean(b),
    })
}

/// Twice the midrank of every value (1-based ranks) and the sizes of tie groups.
fn doubled_midranks(values: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0u64; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Ranks start+1..=end average to (start + 1 + end) / 2.
        let r2 = (start + 1 + end) as u64;
        for &i in &order[start..end] {
            ranks[i] = r2;
        }
        ties.push(end - start);
        start = end;
    }
    (ranks, ties)
}

/// P(|S − E S| ≥ |s − E S|) where S is the doubled rank sum of a uniformly
/// random size-`k` subset of `ranks`.
fn exact_two_sided(ranks: &[u64], k: usize, observed: u64) -> f64 {
    let max_sum: u64 = ranks.iter().sum();
    let width = max_sum as usize + 1;
    // counts[j][s]: subsets of size j with doubled rank sum s.
    let mut counts = vec![vec![0f64; width]; k + 1];
    counts[0][0] = 1.0;
    for (seen, &r) in ranks.iter().enumerate() {
        let r = r as usize;
        for j in (1..=k.min(seen + 1)).rev() {
            let (lo, hi) = counts.split_at_mut(j);
            let (prev, cur) = (&lo[j - 1], &mut hi[0]);
            for s in (r..width).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let n = ranks.len() as u64;
    // The expected doubled rank sum k(n+1) is an integer.
    let center = k as i64 * (n as i64 + 1);
    let dist = |s: i64| (s - center).abs();
    let obs = dist(observed as i64);
    let total: f64 = counts[k].iter().sum();
    let tail: f64 = counts[k]
        .iter()
        .enumerate()
        .filter(|&(s, &c)| c > 0.0 && dist(s as i64) >= obs)
        .map(|(_, &c)| c)
        .sum();
    (tail / total).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_pairs_give_one_third() {
        let r = wilcoxon_rank_sum(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.method, RankSumMethod::Exact);
        assert_eq!(r.u_statistic, 0.0);
        assert_eq!(r.p_value, 1.0 / 3.0);
        assert_eq!((r.mean_a, r.mean_b), (1.5, 3.5));
    }

    #[test]
    fn identical_groups_are_not_significant() {
        let r = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(r.p_value >= 0.99);
        assert_eq!(r.u_statistic, 4.5);
    }

    #[test]
    fn all_tied_gives_p_one() {
        for m in [RankSumMethod::Exact, RankSumMethod::NormalApprox] {
            let r = rank_sum_with_method(&[0.5; 4], &[0.5; 3], m).unwrap();
            assert_eq!(r.p_value, 1.0);
            assert_eq!(r.z_score, 0.0);
        }
    }

    #[test]
    fn large_groups_use_normal_approximation() {
        let a: Vec<f64> = (0..11).map(f64::from).collect();
        let b: Vec<f64> = (100..105).map(f64::from).collect();
        let r = wilcoxon_rank_sum(&a, &b).unwrap();
        assert_eq!(r.method, RankSumMethod::NormalApprox);
        assert_eq!(r.u_statistic, 0.0);
        // z = (27.5 - 0.5) / sqrt(11*5*17/12), p = erfc(|z|/√2)
        let z = 27.0 / (11.0 * 5.0 * 17.0 / 12.0f64).sqrt();
        assert!((r.z_score + z).abs() < 1e-12);
        assert!((r.p_value - erfc(z / std::f64::consts::SQRT_2)).abs() < 1e-15);
    }

    #[test]
    fn empty_and_non_finite_groups_fail() {
        assert_eq!(
            wilcoxon_rank_sum(&[], &[1.0]),
            Err(RankSumError::EmptyGroup { a: 0, b: 1 })
        );
        assert_eq!(
            wilcoxon_rank_sum(&[1.0], &[f64::NAN]),
            Err(RankSumError::NonFinite { group: 'b' })
        );
    }

    #[test]
    fn midranks_average_ties() {
        let (r, t) = doubled_midranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, vec![7, 2, 7, 4]);
        assert_eq!(t, vec![1, 1, 2]);
    }
}
