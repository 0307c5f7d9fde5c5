use super::{log_add, LogProbLattice, BLANK};
use std::collections::BTreeMap;

pub const DEFAULT_BEAM_WIDTH: usize = 5;

/// Per-frame argmax (lowest index on ties), adjacent repeats collapsed,
/// blanks removed.
pub fn ctc_greedy_decode(lattice: &LogProbLattice) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = BLANK;
    for t in 0..lattice.frames() {
        let row = lattice.row(t);
        let best = row
            .iter()
            .enumerate()
            .fold(0, |b, (i, &v)| if v > row[b] { i } else { b });
        if best != BLANK && best != prev {
            out.push(best);
        }
        prev = best;
    }
    out
}

#[derive(Clone, Copy)]
struct PrefixScore {
    blank: f64,
    non_blank: f64,
}

impl PrefixScore {
    const EMPTY: PrefixScore = PrefixScore {
        blank: f64::NEG_INFINITY,
        non_blank: f64::NEG_INFINITY,
    };

    fn total(self) -> f64 {
        log_add(self.blank, self.non_blank)
    }
}

/// Keeps the `width` best prefixes; equal scores prefer the lexicographically
/// smaller prefix. Also reports whether anything was cut.
fn prune(
    beams: BTreeMap<Vec<usize>, PrefixScore>,
    width: usize,
) -> (Vec<(Vec<usize>, PrefixScore)>, bool) {
    let mut v: Vec<_> = beams.into_iter().filter(|(_, s)| s.total() > f64::NEG_INFINITY).collect();
    // BTreeMap order is lexicographic and the sort is stable.
    v.sort_by(|a, b| b.1.total().total_cmp(&a.1.total()));
    let cut = v.len() > width;
    v.truncate(width);
    (v, cut)
}

/// Standard prefix beam search: the surviving prefixes after the last frame,
/// best first, and whether pruning ever discarded a prefix.
///
/// Each hypothesis tracks the log mass of alignments ending in a blank and in
/// its last symbol, so alignments that collapse to the same prefix are merged.
fn prefix_beam(lattice: &LogProbLattice, width: usize) -> (Vec<Vec<usize>>, bool) {
    let mut beam = vec![(
        Vec::new(),
        PrefixScore {
            blank: 0.0,
            non_blank: f64::NEG_INFINITY,
        },
    )];
    let mut pruned = false;
    for t in 0..lattice.frames() {
        let row = lattice.row(t);
        let mut next: BTreeMap<Vec<usize>, PrefixScore> = BTreeMap::new();
        for (prefix, score) in &beam {
            let total = score.total();
            let e = next.entry(prefix.clone()).or_insert(PrefixScore::EMPTY);
            e.blank = log_add(e.blank, total + row[BLANK]);
            let last = prefix.last().copied();
            for (s, &lp) in row.iter().enumerate().skip(1) {
                if lp == f64::NEG_INFINITY {
                    continue;
                }
                if Some(s) == last {
                    // Repeat without a blank collapses into the same prefix.
                    let e = next.get_mut(prefix).expect("inserted above");
                    e.non_blank = log_add(e.non_blank, score.non_blank + lp);
                    let mut ext = prefix.clone();
                    ext.push(s);
                    let e = next.entry(ext).or_insert(PrefixScore::EMPTY);
                    e.non_blank = log_add(e.non_blank, score.blank + lp);
                } else {
                    let mut ext = prefix.clone();
                    ext.push(s);
                    let e = next.entry(ext).or_insert(PrefixScore::EMPTY);
                    e.non_blank = log_add(e.non_blank, total + lp);
                }
            }
        }
        let (kept, cut) = prune(next, width);
        beam = kept;
        pruned |= cut;
    }
    (beam.into_iter().map(|(p, _)| p).collect(), pruned)
}

/// CTC beam search decoding.
///
/// Runs prefix beam search at every width from 1 to `beam_width`, pools the
/// final hypotheses, and returns the one with the highest exact probability
/// (ties to the lexicographically smaller sequence). Pooling makes the
/// candidate set grow with the width, so a wider beam never returns a less
/// probable sequence; a single prefix search alone lacks that guarantee.
/// With a width covering every prefix the result is the most probable
/// collapsed sequence. Width 1 need not coincide with greedy decoding.
pub fn ctc_beam_search(lattice: &LogProbLattice, beam_width: usize) -> Vec<usize> {
    assert!(beam_width >= 1, "beam width must be at least 1");
    let mut candidates = std::collections::BTreeSet::new();
    for w in 1..=beam_width {
        let (finals, pruned) = prefix_beam(lattice, w);
        candidates.extend(finals);
        if !pruned {
            // Nothing was cut, so wider beams repeat this search.
            break;
        }
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for c in candidates {
        let lp = sequence_log_probability(lattice, &c);
        let better = match &best {
            Some((b, _)) => lp > *b,
            None => true,
        };
        if better {
            best = Some((lp, c));
        }
    }
    best.map(|(_, c)| c).unwrap_or_default()
}

/// Exact log-probability that the lattice emits `labels` after collapsing.
pub fn sequence_log_probability(lattice: &LogProbLattice, labels: &[usize]) -> f64 {
    match super::ctc_loss(lattice, labels) {
        Ok(out) if out.feasible => -out.loss,
        _ => f64::NEG_INFINITY,
    }
}

/// Decoded symbol sequence reduced to a single class decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IsolatedPrediction {
    /// First decoded symbol, or `None` (reject) for an empty decode.
    pub symbol: Option<usize>,
    /// Set when the decode held more than one symbol.
    pub multi_symbol: bool,
}

pub fn isolated_prediction(decoded: &[usize]) -> IsolatedPrediction {
    IsolatedPrediction {
        symbol: decoded.first().copied(),
        multi_symbol: decoded.len() > 1,
    }
}
