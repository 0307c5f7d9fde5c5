use super::{Adam, AdamConfig, ModelError, PreparedSample, SequenceClassifier};
use crate::tensor::{Rng, Tensor};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 512,
            epochs: 30,
            seed: 0,
            adam: AdamConfig::default(),
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.epochs == 0 {
            return Err(ModelError::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size < 2 {
            return Err(ModelError::InvalidConfig("batch size must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

/// One line of the training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub epoch: usize,
    pub split: Split,
    pub loss: f64,
    pub accuracy: f64,
}

/// Per-sample evaluation record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionOutcome {
    pub sample_id: String,
    pub true_label: usize,
    /// `None` when the model rejected the sample.
    pub predicted_label: Option<usize>,
    pub correct: bool,
    pub dominant_hand_presence: f64,
    pub multi_symbol: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub mean_loss: f64,
    /// Sorted by sample id.
    pub outcomes: Vec<PredictionOutcome>,
}

fn check_inputs(model: &dyn SequenceClassifier, samples: &[PreparedSample]) -> Result<(), ModelError> {
    let (dim, classes) = (model.input_dim(), model.classes());
    for s in samples {
        if s.features.cols() != dim {
            return Err(ModelError::InputDim {
                sample_id: s.sample_id.clone(),
                expected: dim,
                found: s.features.cols(),
            });
        }
        if s.label >= classes {
            return Err(ModelError::LabelOutOfRange {
                sample_id: s.sample_id.clone(),
                label: s.label,
                classes,
            });
        }
    }
    Ok(())
}

/// Splits a visiting order into batches, folding a trailing singleton into
/// the batch before it.
fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    if out.len() >= 2 && out[out.len() - 1].len() == 1 {
        let n = out.len();
        let start = (n - 2) * size;
        out.truncate(n - 2);
        out.push(&order[start..]);
    }
    out
}

/// Trains with Adam, one record per epoch for the training split and, when
/// given, the validation split. `on_record` sees each record as it is made.
pub fn train(
    model: &mut dyn SequenceClassifier,
    train_set: &[PreparedSample],
    validation: Option<&[PreparedSample]>,
    config: &TrainConfig,
    mut on_record: impl FnMut(&HistoryRecord),
) -> Result<Vec<HistoryRecord>, ModelError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    check_inputs(model, train_set)?;
    if let Some(v) = validation {
        check_inputs(model, v)?;
    }
    let root = Rng::new(config.seed);
    let mut shuffle_rng = root.derive(1);
    let mut dropout_rng = root.derive(2);
    let mut flip_rng = root.derive(3);
    let mut adam = Adam::new(config.adam);
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=config.epochs {
        if config.shuffle {
            shuffle_rng.shuffle(&mut order);
        }
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in batches(&order, config.batch_size) {
            let inputs: Vec<&Tensor> = batch
                .iter()
                .map(|&i| {
                    let s = &train_set[i];
                    match &s.flipped {
                        Some(f) if flip_rng.bernoulli(0.5) => f,
                        _ => &s.features,
                    }
                })
                .collect();
            let labels: Vec<usize> = batch.iter().map(|&i| train_set[i].label).collect();
            model.params_mut().zero_grads();
            let out = model.train_batch(&inputs, &labels, &mut dropout_rng)?;
            adam.step(model.params_mut());
            loss_sum += out.loss * batch.len() as f64;
            correct += out
                .decisions
                .iter()
                .zip(&labels)
                .filter(|(d, &l)| d.class == Some(l))
                .count();
        }
        let rec = HistoryRecord {
            epoch,
            split: Split::Train,
            loss: loss_sum / train_set.len() as f64,
            accuracy: correct as f64 / train_set.len() as f64,
        };
        on_record(&rec);
        history.push(rec);
        if let Some(v) = validation.filter(|v| !v.is_empty()) {
            let e = evaluate(&*model, v)?;
            let rec = HistoryRecord {
                epoch,
                split: Split::Validation,
                loss: e.mean_loss,
                accuracy: e.accuracy,
            };
            on_record(&rec);
            history.push(rec);
        }
    }
    Ok(history)
}

/// Eval-mode predictions for every sample, in parallel, sorted by sample id.
pub fn evaluate(
    model: &dyn SequenceClassifier,
    samples: &[PreparedSample],
) -> Result<Evaluation, ModelError> {
    check_inputs(model, samples)?;
    let results: Vec<_> = samples
        .par_iter()
        .map(|s| model.infer(&s.features, s.label).map(|inf| (s, inf)))
        .collect::<Result<_, _>>()?;
    let mut outcomes: Vec<PredictionOutcome> = results
        .iter()
        .map(|(s, inf)| PredictionOutcome {
            sample_id: s.sample_id.clone(),
            true_label: s.label,
            predicted_label: inf.decision.class,
            correct: inf.decision.class == Some(s.label),
            dominant_hand_presence: s.dominant_hand_presence,
            multi_symbol: inf.decision.multi_symbol,
        })
        .collect();
    outcomes.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    let n = samples.len().max(1) as f64;
    // Summed in input order so the result does not depend on scheduling.
    let mean_loss = results.iter().map(|(_, inf)| inf.loss).sum::<f64>() / n;
    let accuracy = outcomes.iter().filter(|o| o.correct).count() as f64 / n;
    Ok(Evaluation {
        accuracy,
        mean_loss,
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trailing_singleton_is_merged() {
        let order: Vec<usize> = (0..9).collect();
        let b = batches(&order, 4);
        assert_eq!(b.iter().map(|x| x.len()).collect::<Vec<_>>(), vec![4, 5]);
        let b = batches(&order, 3);
        assert_eq!(b.len(), 3);
        assert_eq!(batches(&order[..1], 4).len(), 1);
    }

    #[test]
    fn zero_epochs_rejected() {
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        assert!(matches!(cfg.validate(), Err(ModelError::InvalidConfig(_))));
    }
}
