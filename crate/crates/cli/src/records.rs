//! Files written by `train`, `eval` and `analyze`.

use crate::manifest::csv_writer;
use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use signkit_core::diagnostics::HistogramBin;
use signkit_core::model::{FeatureConfig, ModelConfig, PredictionOutcome};
use std::fs;
use std::path::Path;

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const MODEL_FILE: &str = "model.json";
pub const HISTORY_FILE: &str = "history.ndjson";
pub const OUTCOMES_FILE: &str = "outcomes.csv";
pub const REPORT_FILE: &str = "report.json";
pub const HIST_FILE: &str = "hist.csv";
pub const SPLIT_TRAIN_FILE: &str = "split_train.csv";
pub const SPLIT_VALIDATION_FILE: &str = "split_validation.csv";

/// Everything needed to rebuild a trained model next to its checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub features: FeatureConfig,
}

impl RunConfig {
    pub fn read(path: &Path) -> anyhow::Result<RunConfig> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}

/// One row of `outcomes.csv`. Booleans are written as 0/1 and a rejected
/// prediction leaves `predicted_label` empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct OutcomeRow {
    sample_id: String,
    true_label: usize,
    predicted_label: Option<usize>,
    correct: u8,
    dominant_hand_presence: f64,
    multi_symbol: u8,
}

pub fn write_outcomes(path: &Path, outcomes: &[PredictionOutcome]) -> anyhow::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "sample_id",
        "true_label",
        "predicted_label",
        "correct",
        "dominant_hand_presence",
        "multi_symbol",
    ])?;
    for o in outcomes {
        w.write_record([
            o.sample_id.clone(),
            o.true_label.to_string(),
            o.predicted_label.map(|p| p.to_string()).unwrap_or_default(),
            u8::from(o.correct).to_string(),
            o.dominant_hand_presence.to_string(),
            u8::from(o.multi_symbol).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_outcomes(path: &Path) -> anyhow::Result<Vec<PredictionOutcome>> {
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, rec) in reader.deserialize::<OutcomeRow>().enumerate() {
        let r = rec.with_context(|| format!("{}: row {}", path.display(), i + 1))?;
        if r.correct > 1 || r.multi_symbol > 1 {
            bail!("{}: row {}: flags must be 0 or 1", path.display(), i + 1);
        }
        if !(0.0..=1.0).contains(&r.dominant_hand_presence) {
            bail!(
                "{}: row {}: presence {} outside [0, 1]",
                path.display(),
                i + 1,
                r.dominant_hand_presence
            );
        }
        let correct = r.correct == 1;
        if correct != (r.predicted_label == Some(r.true_label)) {
            bail!(
                "{}: sample {}: correct flag disagrees with the labels",
                path.display(),
                r.sample_id
            );
        }
        out.push(PredictionOutcome {
            sample_id: r.sample_id,
            true_label: r.true_label,
            predicted_label: r.predicted_label,
            correct,
            dominant_hand_presence: r.dominant_hand_presence,
            multi_symbol: r.multi_symbol == 1,
        });
    }
    Ok(out)
}

pub fn write_histogram(path: &Path, bins: &[HistogramBin]) -> anyhow::Result<()> {
    let mut w = csv_writer(path)?;
    for b in bins {
        w.serialize(b)?;
    }
    w.flush()?;
    Ok(())
}
