//! Pose-sequence sign recognition toolkit.
//!
//! The crate covers the binary pose container, per-frame features, a small
//! dense tensor core with hand-written gradients, CTC and beam search, the
//! BiLSTM and transformer-CTC classifiers with their training loop, error
//! diagnostics, and a synthetic data generator used for tests.

pub mod diagnostics;
pub mod features;
pub mod gradcheck;
pub mod loss;
pub mod model;
pub mod pose;
pub mod synth;
pub mod tensor;

pub use features::{FeatureError, FeatureMatrix, Hand, NormalizationSpec, PointRef};
pub use pose::{
    ComponentSpec, MirrorTable, PoseBody, PoseError, PoseHeader, PoseSequence, SkeletonLayout,
};
pub use tensor::{Mode, PackedLayout, ParameterSet, Rng, Tensor, TensorError};
