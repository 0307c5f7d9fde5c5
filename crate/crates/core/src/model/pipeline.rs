use super::{LabeledSample, ModelError};
use crate::features::{
    dominant_hand, flip_horizontal, frame_features, hand_presence, normalize_pose, FeatureError,
    Hand, NormalizationSpec,
};
use crate::pose::{MirrorTable, PoseSequence, SkeletonLayout, BODY, LEFT_HAND, RIGHT_HAND};
use crate::tensor::Tensor;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// How horizontal flips are used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlipMode {
    /// Never flip.
    Off,
    /// Training augmentation: each sample is flipped with probability 0.5
    /// per epoch. Evaluation is unflipped.
    All,
    /// Flip every sample whose dominant hand is the left one, in training and
    /// evaluation alike, so all signers look right-handed.
    #[default]
    DetectedLeftHanded,
}

impl std::str::FromStr for FlipMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "off" => Ok(FlipMode::Off),
            "all" => Ok(FlipMode::All),
            "detected-left-handed" => Ok(FlipMode::DetectedLeftHanded),
            other => Err(format!(
                "unknown flip mode {other:?} (expected off, all, detected-left-handed)"
            )),
        }
    }
}

/// Which components feed the model and how frames are normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub components: Vec<String>,
    pub normalization: Option<NormalizationSpec>,
    pub flip_mode: FlipMode,
}

impl Default for FeatureConfig {
    /// Body and both hands (face dropped), shoulder normalization.
    fn default() -> Self {
        FeatureConfig {
            components: vec![BODY.into(), LEFT_HAND.into(), RIGHT_HAND.into()],
            normalization: Some(NormalizationSpec::default()),
            flip_mode: FlipMode::default(),
        }
    }
}

/// Turns pose sequences into model inputs.
#[derive(Debug, Clone)]
pub struct FeaturePipeline {
    pub config: FeatureConfig,
    pub mirror: MirrorTable,
}

/// A sample reduced to model inputs plus what evaluation reports need.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSample {
    pub sample_id: String,
    pub signer_id: String,
    pub label: usize,
    /// T×F features as seen at evaluation time.
    pub features: Tensor,
    /// Features of the mirrored sequence, kept only for flip augmentation.
    pub flipped: Option<Tensor>,
    pub dominant_hand: Hand,
    pub dominant_hand_presence: f64,
}

impl FeaturePipeline {
    /// Uses the mirror table of the shipped 75-point layout.
    pub fn new(config: FeatureConfig) -> Self {
        FeaturePipeline {
            config,
            mirror: SkeletonLayout::holistic75().mirror,
        }
    }

    fn featurize(&self, p: &PoseSequence) -> Result<Tensor, FeatureError> {
        let normalized;
        let p = match &self.config.normalization {
            Some(spec) => {
                normalized = normalize_pose(p, spec)?;
                &normalized
            }
            None => p,
        };
        let fm = frame_features(p);
        Ok(Tensor::from_vec(&[fm.rows(), fm.cols()], fm.values().to_vec())
            .expect("feature matrix has positive dims"))
    }

    /// Feature width for a pose with the configured components.
    pub fn feature_dim(&self, layout: &SkeletonLayout) -> usize {
        let selected: Vec<_> = layout
            .components
            .iter()
            .filter(|c| self.config.components.contains(&c.name))
            .collect();
        selected
            .iter()
            .map(|c| 2 * c.point_count as usize + 2 * c.limbs.len())
            .sum()
    }

    pub fn prepare(&self, sample: &LabeledSample) -> Result<PreparedSample, ModelError> {
        let wrap = |source: FeatureError| ModelError::Sample {
            sample_id: sample.sample_id.clone(),
            source,
        };
        let pose = sample
            .pose
            .select_components(&self.config.components)
            .map_err(|e| wrap(e.into()))?;
        let dominant = dominant_hand(&pose).map_err(wrap)?;
        let presence = hand_presence(&pose, dominant).map_err(wrap)?;
        let mode = self.config.flip_mode;
        let features = if mode == FlipMode::DetectedLeftHanded && dominant == Hand::Left {
            self.featurize(&flip_horizontal(&pose, &self.mirror).map_err(wrap)?)
        } else {
            self.featurize(&pose)
        }
        .map_err(wrap)?;
        let flipped = if mode == FlipMode::All {
            Some(
                self.featurize(&flip_horizontal(&pose, &self.mirror).map_err(wrap)?)
                    .map_err(wrap)?,
            )
        } else {
            None
        };
        Ok(PreparedSample {
            sample_id: sample.sample_id.clone(),
            signer_id: sample.signer_id.clone(),
            label: sample.label,
            features,
            flipped,
            dominant_hand: dominant,
            dominant_hand_presence: presence,
        })
    }
}

/// Prepares samples in parallel; output order matches input order.
pub fn prepare_samples(
    pipeline: &FeaturePipeline,
    samples: &[LabeledSample],
) -> Result<Vec<PreparedSample>, ModelError> {
    samples.par_iter().map(|s| pipeline.prepare(s)).collect()
}
