use super::SynthError;
use crate::model::LabeledSample;
use crate::tensor::Rng;
use std::collections::{BTreeMap, BTreeSet};

/// Chooses the training signers: the signers are shuffled with `seed`, and
/// the prefix of that order whose sample count is closest to
/// `train_fraction` of the total becomes the training set (at least one
/// signer on each side; ties prefer fewer training signers).
pub fn split_signers(
    sample_counts: &BTreeMap<String, usize>,
    train_fraction: f64,
    seed: u64,
) -> Result<(BTreeSet<String>, BTreeSet<String>), SynthError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(SynthError::InvalidFraction(train_fraction));
    }
    if sample_counts.len() < 2 {
        return Err(SynthError::TooFewSigners(sample_counts.len()));
    }
    let mut order: Vec<&String> = sample_counts.keys().collect();
    Rng::new(seed).shuffle(&mut order);
    let total: usize = sample_counts.values().sum();
    let goal = train_fraction * total as f64;
    let mut best = (f64::INFINITY, 1);
    let mut running = 0;
    for (k, id) in order.iter().enumerate().take(order.len() - 1) {
        running += sample_counts[*id];
        let gap = (running as f64 - goal).abs();
        if gap < best.0 {
            best = (gap, k + 1);
        }
    }
    let train = order[..best.1].iter().map(|s| s.to_string()).collect();
    let validation = order[best.1..].iter().map(|s| s.to_string()).collect();
    Ok((train, validation))
}

/// Splits samples by whole signers; no signer appears on both sides.
/// Sample order is preserved within each side.
pub fn signer_disjoint_split(
    samples: &[LabeledSample],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>), SynthError> {
    let mut counts = BTreeMap::new();
    for s in samples {
        *counts.entry(s.signer_id.clone()).or_insert(0) += 1;
    }
    let (train_ids, _) = split_signers(&counts, train_fraction, seed)?;
    Ok(samples
        .iter()
        .cloned()
        .partition(|s| train_ids.contains(&s.signer_id)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(sizes: &[usize]) -> BTreeMap<String, usize> {
        sizes.iter().enumerate().map(|(i, &n)| (format!("s{i}"), n)).collect()
    }

    #[test]
    fn two_signers_split_one_each() {
        let (a, b) = split_signers(&counts(&[10, 10]), 0.5, 4).unwrap();
        assert_eq!((a.len(), b.len()), (1, 1));
        assert!(a.is_disjoint(&b));
    }

    #[test]
    fn five_equal_signers_at_eighty_percent() {
        for seed in 0..10 {
            let (a, b) = split_signers(&counts(&[7; 5]), 0.8, seed).unwrap();
            assert_eq!((a.len(), b.len()), (4, 1));
        }
    }

    #[test]
    fn errors() {
        assert_eq!(split_signers(&counts(&[5]), 0.5, 0), Err(SynthError::TooFewSigners(1)));
        assert_eq!(split_signers(&counts(&[5, 5]), 1.0, 0), Err(SynthError::InvalidFraction(1.0)));
    }
}
