//! Hand-presence analysis of evaluation outcomes: grouping by correctness,
//! rank-sum testing and histogram tables.

mod ranksum;

pub use ranksum::{
    rank_sum_with_method, wilcoxon_rank_sum, RankSumError, RankSumMethod, RankSumResult,
    EXACT_MAX_GROUP,
};

use crate::model::PredictionOutcome;
use serde::{Deserialize, Serialize};

/// Default number of histogram bins (10-point-wide presence buckets).
pub const DEFAULT_BINS: usize = 10;

/// Presence fractions split by whether the prediction was correct.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PresenceGroups {
    pub correct: Vec<f64>,
    pub incorrect: Vec<f64>,
}

impl PresenceGroups {
    /// Groups arbitrary `(correct, presence)` pairs, e.g. a both-hands measure.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, f64)>) -> Self {
        let mut g = PresenceGroups::default();
        for (ok, v) in pairs {
            if ok {
                g.correct.push(v);
            } else {
                g.incorrect.push(v);
            }
        }
        g
    }

    pub fn mean_correct(&self) -> Option<f64> {
        mean(&self.correct)
    }

    pub fn mean_incorrect(&self) -> Option<f64> {
        mean(&self.incorrect)
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Splits the dominant-hand presence of each outcome by its correct flag.
pub fn group_by_correctness(outcomes: &[PredictionOutcome]) -> PresenceGroups {
    PresenceGroups::from_pairs(outcomes.iter().map(|o| (o.correct, o.dominant_hand_presence)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_low: f64,
    pub bin_high: f64,
    pub count_correct: usize,
    pub count_incorrect: usize,
}

/// Bin of `v` among `bins` equal-width bins over [0, 1]; the last bin is
/// closed on the right. Values outside [0, 1] are clamped.
fn bin_index(v: f64, bins: usize) -> usize {
    ((v.clamp(0.0, 1.0) * bins as f64).floor() as usize).min(bins - 1)
}

/// Presence histogram with `bins` equal-width bins over [0, 1].
///
/// # Panics
/// If `bins` is zero.
pub fn presence_histogram(groups: &PresenceGroups, bins: usize) -> Vec<HistogramBin> {
    assert!(bins >= 1, "histogram needs at least one bin");
    let mut table: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            bin_low: i as f64 / bins as f64,
            bin_high: (i + 1) as f64 / bins as f64,
            count_correct: 0,
            count_incorrect: 0,
        })
        .collect();
    for &v in &groups.correct {
        table[bin_index(v, bins)].count_correct += 1;
    }
    for &v in &groups.incorrect {
        table[bin_index(v, bins)].count_incorrect += 1;
    }
    table
}

/// Formats a fraction as a percentage with two decimals, e.g. `0.8513` → `85.13%`.
pub fn format_percent(fraction: f64) -> String {
    format!("{:.2}%", fraction * 100.0)
}

/// Everything the presence analysis produces for one set of outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub samples: usize,
    pub accuracy: f64,
    pub correct_count: usize,
    pub incorrect_count: usize,
    pub mean_presence_correct: Option<f64>,
    pub mean_presence_incorrect: Option<f64>,
    /// Present only when both groups are nonempty.
    pub test: Option<RankSumResult>,
    pub test_skipped_reason: Option<String>,
    /// Predictions whose decoded sequence had more than one symbol.
    pub multi_symbol_count: usize,
    /// Predictions that decoded to no symbol at all.
    pub reject_count: usize,
    pub histogram: Vec<HistogramBin>,
}

/// Groups, tests and bins `outcomes`.
///
/// The rank-sum test compares the correct group (`a`) against the incorrect
/// group (`b`); it is skipped, with a reason, when either group is empty.
pub fn analysis_report(outcomes: &[PredictionOutcome], bins: usize) -> AnalysisReport {
    let groups = group_by_correctness(outcomes);
    let (test, test_skipped_reason) = match wilcoxon_rank_sum(&groups.correct, &groups.incorrect) {
        Ok(r) => (Some(r), None),
        Err(RankSumError::EmptyGroup { a, b }) => {
            let reason = match (a, b) {
                (0, 0) => "no outcomes".to_string(),
                (_, 0) => "no incorrect predictions".to_string(),
                _ => "no correct predictions".to_string(),
            };
            (None, Some(reason))
        }
        Err(e) => (None, Some(e.to_string())),
    };
    let samples = outcomes.len();
    AnalysisReport {
        samples,
        accuracy: if samples == 0 {
            0.0
        } else {
            groups.correct.len() as f64 / samples as f64
        },
        correct_count: groups.correct.len(),
        incorrect_count: groups.incorrect.len(),
        mean_presence_correct: groups.mean_correct(),
        mean_presence_incorrect: groups.mean_incorrect(),
        test,
        test_skipped_reason,
        multi_symbol_count: outcomes.iter().filter(|o| o.multi_symbol).count(),
        reject_count: outcomes.iter().filter(|o| o.predicted_label.is_none()).count(),
        histogram: presence_histogram(&groups, bins),
    }
}

impl AnalysisReport {
    /// Human-readable summary lines.
    pub fn summary(&self) -> String {
        let pct = |m: Option<f64>| m.map_or_else(|| "n/a".to_string(), format_percent);
        let mut out = format!(
            "samples {}  accuracy {:.4}\nmean dominant-hand presence: correct {} (n={}), incorrect {} (n={})\n",
            self.samples,
            self.accuracy,
            pct(self.mean_presence_correct),
            self.correct_count,
            pct(self.mean_presence_incorrect),
            self.incorrect_count,
        );
        match (&self.test, &self.test_skipped_reason) {
            (Some(t), _) => out.push_str(&format!(
                "rank-sum test ({}, two-sided): U = {}, z = {:.4}, p = {:.3e}\n",
                match t.method {
                    RankSumMethod::Exact => "exact",
                    RankSumMethod::NormalApprox => "normal approximation",
                },
                t.u_statistic,
                t.z_score,
                t.p_value
            )),
            (None, reason) => out.push_str(&format!(
                "rank-sum test skipped: {}\n",
                reason.as_deref().unwrap_or("unknown")
            )),
        }
        out.push_str(&format!(
            "multi-symbol predictions {}  rejects {}\n",
            self.multi_symbol_count, self.reject_count
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(correct: bool, presence: f64) -> PredictionOutcome {
        PredictionOutcome {
            sample_id: String::new(),
            true_label: 0,
            predicted_label: Some(if correct { 0 } else { 1 }),
            correct,
            dominant_hand_presence: presence,
            multi_symbol: false,
        }
    }

    #[test]
    fn grouping_means() {
        let g = group_by_correctness(&[outcome(true, 1.0), outcome(true, 0.5), outcome(false, 0.2)]);
        assert_eq!(g.mean_correct(), Some(0.75));
        assert_eq!(g.mean_incorrect(), Some(0.2));
        let all = group_by_correctness(&[outcome(true, 0.3)]);
        assert!(all.incorrect.is_empty());
        assert_eq!(all.mean_incorrect(), None);
    }

    #[test]
    fn percent_rendering_matches_reported_means() {
        assert_eq!(format_percent(0.8513), "85.13%");
        assert_eq!(format_percent(0.7978), "79.78%");
    }

    #[test]
    fn histogram_edges() {
        let g = PresenceGroups {
            correct: vec![0.0, 0.1, 0.55, 1.0],
            incorrect: vec![0.3],
        };
        let one = presence_histogram(&g, 1);
        assert_eq!((one[0].count_correct, one[0].count_incorrect), (4, 1));
        let ten = presence_histogram(&g, 10);
        assert_eq!(ten[9].count_correct, 1);
        assert_eq!(ten[1].count_correct, 1);
        assert_eq!(ten[5].count_correct, 1);
        assert_eq!(ten[3].count_incorrect, 1);
        assert_eq!((ten[9].bin_low, ten[9].bin_high), (0.9, 1.0));
    }

    #[test]
    fn report_skips_test_without_incorrect_predictions() {
        let r = analysis_report(&[outcome(true, 0.9), outcome(true, 0.8)], 10);
        assert!(r.test.is_none());
        assert_eq!(r.test_skipped_reason.as_deref(), Some("no incorrect predictions"));
        assert!(r.summary().contains("skipped"));
    }

    #[test]
    fn report_counts_and_round_trip() {
        let mut reject = outcome(false, 0.1);
        reject.predicted_label = None;
        let mut multi = outcome(true, 0.9);
        multi.multi_symbol = true;
        let r = analysis_report(&[reject, multi, outcome(true, 0.7), outcome(false, 0.2)], 5);
        assert_eq!((r.reject_count, r.multi_symbol_count), (1, 1));
        assert_eq!(r.accuracy, 0.5);
        assert!(r.test.is_some());
        let json = serde_json::to_string(&r).unwrap();
        let back: AnalysisReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        assert!(r.summary().contains("80.00%"));
    }
}
