//! The two sequence classifiers, their feature pipeline, and training.

mod adam;
mod bilstm;
mod pipeline;
mod train;
mod transformer_ctc;

pub use adam::{Adam, AdamConfig};
pub use bilstm::{BiLstmConfig, BiLstmModel};
pub use pipeline::{prepare_samples, FeatureConfig, FeaturePipeline, FlipMode, PreparedSample};
pub use train::{
    evaluate, train, Evaluation, HistoryRecord, PredictionOutcome, Split, TrainConfig,
};
pub use transformer_ctc::{TransformerCtcConfig, TransformerCtcModel};

use crate::features::FeatureError;
use crate::loss::LossError;
use crate::pose::PoseSequence;
use crate::tensor::{CheckpointError, PackedLayout, ParameterSet, Rng, Tensor, TensorError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("sample {sample_id}: {source}")]
    Sample {
        sample_id: String,
        #[source]
        source: FeatureError,
    },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("sample {sample_id}: label {label} out of range for {classes} classes")]
    LabelOutOfRange {
        sample_id: String,
        label: usize,
        classes: usize,
    },
    #[error("sample {sample_id}: {found} features per frame, model expects {expected}")]
    InputDim {
        sample_id: String,
        expected: usize,
        found: usize,
    },
}

/// A labeled pose sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub sample_id: String,
    pub pose: PoseSequence,
    pub label: usize,
    pub signer_id: String,
}

/// Architecture and hyperparameters of a model, serialized next to checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    Bilstm(BiLstmConfig),
    TransformerCtc(TransformerCtcConfig),
}

impl ModelConfig {
    pub fn input_dim(&self) -> usize {
        match self {
            ModelConfig::Bilstm(c) => c.input_dim,
            ModelConfig::TransformerCtc(c) => c.input_dim,
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            ModelConfig::Bilstm(c) => c.classes,
            ModelConfig::TransformerCtc(c) => c.classes,
        }
    }
}

/// One class decision. `class` is `None` when the model rejects the sample
/// (an empty CTC decode).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub class: Option<usize>,
    pub multi_symbol: bool,
}

impl Decision {
    pub fn class(c: usize) -> Self {
        Decision {
            class: Some(c),
            multi_symbol: false,
        }
    }
}

/// Result of a training-mode pass over one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput {
    /// Mean loss over the batch's samples.
    pub loss: f64,
    pub decisions: Vec<Decision>,
}

/// Eval-mode result for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inference {
    pub decision: Decision,
    pub loss: f64,
}

/// Common interface of the trainable classifiers.
pub trait SequenceClassifier: Send + Sync {
    fn config(&self) -> ModelConfig;
    fn params(&self) -> &ParameterSet;
    fn params_mut(&mut self) -> &mut ParameterSet;

    /// Training-mode forward and backward over a batch of T×F inputs.
    /// Gradients accumulate into the parameter set; running statistics update.
    fn train_batch(
        &mut self,
        inputs: &[&Tensor],
        labels: &[usize],
        rng: &mut Rng,
    ) -> Result<BatchOutput, ModelError>;

    /// Eval-mode decision and loss for one sample. Never mutates the model.
    fn infer(&self, input: &Tensor, label: usize) -> Result<Inference, ModelError>;

    fn input_dim(&self) -> usize {
        self.config().input_dim()
    }

    fn classes(&self) -> usize {
        self.config().classes()
    }
}

/// Builds a freshly initialized model; the same seed gives identical parameters.
pub fn build_model(config: &ModelConfig, rng: &mut Rng) -> Result<Box<dyn SequenceClassifier>, ModelError> {
    Ok(match config {
        ModelConfig::Bilstm(c) => Box::new(BiLstmModel::new(c.clone(), rng)?),
        ModelConfig::TransformerCtc(c) => Box::new(TransformerCtcModel::new(c.clone(), rng)?),
    })
}

/// Stacks variable-length T×F inputs into one packed matrix.
pub(crate) fn pack(inputs: &[&Tensor]) -> Result<(Tensor, PackedLayout), TensorError> {
    let layout = PackedLayout::new(inputs.iter().map(|t| t.rows()).collect())?;
    let f = inputs[0].cols();
    let mut data = Vec::with_capacity(layout.total() * f);
    for t in inputs {
        let (_, c) = t.dims2("pack")?;
        if c != f {
            return Err(crate::tensor::mismatch("pack", format!("{c} columns, expected {f}")));
        }
        data.extend_from_slice(t.data());
    }
    Ok((Tensor::from_vec(&[layout.total(), f], data)?, layout))
}

pub(crate) fn check_labels(labels: &[usize], classes: usize) -> Result<(), ModelError> {
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(ModelError::LabelOutOfRange {
            sample_id: String::new(),
            label,
            classes,
        });
    }
    Ok(())
}
