//! Fixtures shared by the benchmarks.

use signkit_core::loss::LogProbLattice;
use signkit_core::model::{prepare_samples, FeatureConfig, FeaturePipeline, PreparedSample};
use signkit_core::synth::{generate_dataset, SynthesisConfig};
use signkit_core::{PoseSequence, Rng, Tensor};

/// A small synthetic dataset, already turned into model inputs.
pub fn prepared_samples(classes: usize, per_class: usize) -> Vec<PreparedSample> {
    let data = generate_dataset(&SynthesisConfig::new(classes, per_class, 3, 1)).expect("valid config");
    prepare_samples(&FeaturePipeline::new(FeatureConfig::default()), &data).expect("synthetic data prepares")
}

/// One synthetic 75-point pose sequence.
pub fn pose() -> PoseSequence {
    let data = generate_dataset(&SynthesisConfig::new(2, 1, 2, 3)).expect("valid config");
    data.into_iter().next().expect("non-empty").pose
}

/// A T×(C+1) log-probability lattice from uniform logits.
pub fn lattice(frames: usize, classes: usize, seed: u64) -> LogProbLattice {
    let logits = Tensor::uniform(&[frames, classes + 1], -3.0, 3.0, &mut Rng::new(seed));
    LogProbLattice::from_logits(&logits).expect("positive dims")
}

pub fn matrix(rows: usize, cols: usize, seed: u64) -> Tensor {
    Tensor::uniform(&[rows, cols], -1.0, 1.0, &mut Rng::new(seed))
}
