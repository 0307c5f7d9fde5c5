//! Generators and brute-force oracles shared by the integration tests and
//! the acceptance run. Everything here is deliberately naive.
#![allow(dead_code)]

use signkit_core::loss::LogProbLattice;
use signkit_core::pose::{ComponentSpec, PoseHeader, PoseSequence, SkeletonLayout};
use signkit_core::{Rng, Tensor};

/// A random valid pose: 1–3 components, 1–`max_points` points each, random
/// limbs, 2 or 3 dims, 1–`max_frames` frames, about a quarter of keypoints absent.
pub fn random_pose(rng: &mut Rng, max_frames: usize, max_points: usize) -> PoseSequence {
    let components = 1 + rng.below(3);
    let mut specs = Vec::new();
    let mut total = 0;
    for c in 0..components {
        let left = max_points.saturating_sub(total).max(components - c);
        let budget = (left - (components - c - 1)).max(1);
        let n = 1 + rng.below(budget);
        total += n;
        let mut limbs = Vec::new();
        if n >= 2 {
            for _ in 0..rng.below(2 * n) {
                let a = rng.below(n) as u16;
                let b = rng.below(n) as u16;
                if a != b {
                    limbs.push((a, b));
                }
            }
        }
        let name = format!("C{c}_{}", rng.below(1000));
        specs.push(ComponentSpec::new(name, n as u16, limbs).unwrap());
    }
    let dims = if rng.bernoulli(0.5) { 2 } else { 3 };
    let fps = [24.0f32, 25.0, 29.97, 30.0, 60.0][rng.below(5)];
    let header = PoseHeader::new(fps, dims, specs).unwrap();
    let frames = 1 + rng.below(max_frames);
    fill_random(rng, header, frames)
}

/// A random pose on the shipped 75-point layout.
pub fn random_holistic75(rng: &mut Rng, frames: usize) -> PoseSequence {
    let header = SkeletonLayout::holistic75().header(30.0, 2).unwrap();
    fill_random(rng, header, frames)
}

fn fill_random(rng: &mut Rng, header: PoseHeader, frames: usize) -> PoseSequence {
    let k = header.total_points();
    let d = header.dims();
    let mut coords = vec![0.0f32; frames * k * d];
    let mut confs = vec![0.0f32; frames * k];
    for i in 0..frames * k {
        if rng.bernoulli(0.25) {
            continue;
        }
        confs[i] = if rng.bernoulli(0.2) { 1.0 } else { rng.uniform_range(1e-3, 1.0) as f32 };
        for v in &mut coords[i * d..(i + 1) * d] {
            *v = rng.uniform_range(-2.0, 2.0) as f32;
        }
    }
    PoseSequence::from_parts(header, frames, coords, confs).unwrap()
}

/// A random normalized lattice with `t` frames and `classes` + 1 symbols.
pub fn random_lattice(rng: &mut Rng, t: usize, classes: usize) -> LogProbLattice {
    let logits = Tensor::uniform(&[t, classes + 1], -3.0, 3.0, rng);
    LogProbLattice::from_logits(&logits).unwrap()
}

/// Merges repeats, then drops blanks (symbol 0).
pub fn collapse(path: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &s in path {
        if Some(s) != prev && s != 0 {
            out.push(s);
        }
        prev = Some(s);
    }
    out
}

/// Calls `f(path, probability)` for every one of the (C+1)^T alignments.
pub fn for_each_alignment(lattice: &LogProbLattice, mut f: impl FnMut(&[usize], f64)) {
    let (t, s) = (lattice.frames(), lattice.symbols());
    let mut path = vec![0usize; t];
    loop {
        let p: f64 = (0..t).map(|i| lattice.log_prob(i, path[i]).exp()).product();
        f(&path, p);
        let mut i = 0;
        loop {
            if i == t {
                return;
            }
            path[i] += 1;
            if path[i] < s {
                break;
            }
            path[i] = 0;
            i += 1;
        }
    }
}

/// Σ of alignment probabilities collapsing to `target`.
pub fn brute_force_ctc_probability(lattice: &LogProbLattice, target: &[usize]) -> f64 {
    let mut total = 0.0;
    for_each_alignment(lattice, |path, p| {
        if collapse(path) == target {
            total += p;
        }
    });
    total
}

/// Every collapsed labeling with its total probability, sorted by labeling.
pub fn labeling_probabilities(lattice: &LogProbLattice) -> Vec<(Vec<usize>, f64)> {
    let mut map = std::collections::BTreeMap::new();
    for_each_alignment(lattice, |path, p| {
        *map.entry(collapse(path)).or_insert(0.0) += p;
    });
    map.into_iter().collect()
}

/// Midranks (1-based) of the pooled values.
fn midranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|&v| {
            let below = values.iter().filter(|&&w| w < v).count() as f64;
            let equal = values.iter().filter(|&&w| w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Two-sided permutation p-value of the rank-sum statistic by listing every
/// way of choosing |a| of the pooled positions.
pub fn brute_force_rank_sum_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let (n, k) = (pooled.len(), a.len());
    let expected = k as f64 * (n as f64 + 1.0) / 2.0;
    let observed: f64 = ranks[..k].iter().sum();
    let obs_dev = (observed - expected).abs();
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let s: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        total += 1;
        if (s - expected).abs() >= obs_dev - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

/// Mann-Whitney U of `a` by counting pairs.
pub fn brute_force_u(a: &[f64], b: &[f64]) -> f64 {
    let mut u = 0.0;
    for &x in a {
        for &y in b {
            u += if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 };
        }
    }
    u
}
