use signkit_core::features::flip_horizontal;
use signkit_core::model::{
    build_model, evaluate, prepare_samples, train, Adam, AdamConfig, BiLstmConfig,
    FeatureConfig, FeaturePipeline, FlipMode, LabeledSample, ModelConfig, PreparedSample,
    TrainConfig, TransformerCtcConfig,
};
use signkit_core::synth::{generate_dataset, SynthesisConfig};
use signkit_core::{Rng, Tensor};

fn prepared(classes: usize, per_class: usize, seed: u64, flip_mode: FlipMode) -> Vec<PreparedSample> {
    let data = generate_dataset(&SynthesisConfig::new(classes, per_class, 3, seed)).unwrap();
    let pipe = FeaturePipeline::new(FeatureConfig { flip_mode, ..FeatureConfig::default() });
    prepare_samples(&pipe, &data).unwrap()
}

fn small_bilstm(input_dim: usize, classes: usize) -> ModelConfig {
    ModelConfig::Bilstm(BiLstmConfig {
        projection_dim: 32,
        lstm_hidden: 16,
        dropout: 0.0,
        ..BiLstmConfig::standard(input_dim, classes)
    })
}

fn small_transformer(input_dim: usize, classes: usize) -> ModelConfig {
    ModelConfig::TransformerCtc(TransformerCtcConfig {
        d_model: 32,
        heads: 4,
        ff_dim: 64,
        dropout: 0.0,
        ..TransformerCtcConfig::standard(input_dim, classes)
    })
}

/// Repeats one batch until the reported loss falls below 0.01.
fn steps_to_overfit(config: &ModelConfig, batch: &[PreparedSample]) -> Option<usize> {
    let mut model = build_model(config, &mut Rng::new(1)).unwrap();
    let mut adam = Adam::new(AdamConfig { learning_rate: 3e-3, ..AdamConfig::default() });
    let inputs: Vec<&Tensor> = batch.iter().map(|s| &s.features).collect();
    let labels: Vec<usize> = batch.iter().map(|s| s.label).collect();
    let mut rng = Rng::new(2);
    for step in 1..=500 {
        model.params_mut().zero_grads();
        let out = model.train_batch(&inputs, &labels, &mut rng).unwrap();
        if out.loss < 0.01 {
            return Some(step);
        }
        adam.step(model.params_mut());
    }
    None
}

#[test]
fn both_models_overfit_a_single_batch() {
    let data = prepared(4, 2, 21, FlipMode::Off);
    assert_eq!(data.len(), 8);
    let f = data[0].features.cols();
    for config in [small_bilstm(f, 4), small_transformer(f, 4)] {
        let steps = steps_to_overfit(&config, &data);
        assert!(steps.is_some(), "{config:?} did not reach loss 0.01 in 500 steps");
    }
}

#[test]
fn eight_two_class_samples_are_learned_within_fifty_epochs() {
    let data = prepared(2, 4, 5, FlipMode::DetectedLeftHanded);
    let f = data[0].features.cols();
    let mut model = build_model(&small_bilstm(f, 2), &mut Rng::new(0)).unwrap();
    let cfg = TrainConfig { batch_size: 4, epochs: 50, seed: 3, ..TrainConfig::default() };
    let history = train(model.as_mut(), &data, None, &cfg, |_| {}).unwrap();
    assert!(history.iter().any(|r| r.accuracy == 1.0), "train accuracy never reached 1.0");
    assert_eq!(evaluate(model.as_ref(), &data).unwrap().accuracy, 1.0);
}

#[test]
fn evaluation_never_mutates_the_model() {
    let data = prepared(3, 4, 9, FlipMode::DetectedLeftHanded);
    let f = data[0].features.cols();
    for config in [small_bilstm(f, 3), small_transformer(f, 3)] {
        let mut model = build_model(&config, &mut Rng::new(4)).unwrap();
        let cfg = TrainConfig { batch_size: 4, epochs: 2, seed: 1, ..TrainConfig::default() };
        train(model.as_mut(), &data, None, &cfg, |_| {}).unwrap();
        let before = model.params().clone();
        let first = evaluate(model.as_ref(), &data).unwrap();
        let second = evaluate(model.as_ref(), &data).unwrap();
        assert_eq!(&before, model.params());
        assert_eq!(first, second);
        assert_eq!(first.outcomes.len(), data.len());
        let ids: Vec<_> = first.outcomes.iter().map(|o| o.sample_id.clone()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
    }
}

#[test]
fn training_is_reproducible_bit_for_bit() {
    let data = prepared(3, 4, 13, FlipMode::All);
    let f = data[0].features.cols();
    let config = ModelConfig::Bilstm(BiLstmConfig {
        projection_dim: 16,
        lstm_hidden: 8,
        ..BiLstmConfig::standard(f, 3)
    });
    let run = || {
        let mut model = build_model(&config, &mut Rng::new(6)).unwrap();
        let cfg = TrainConfig { batch_size: 5, epochs: 3, seed: 8, ..TrainConfig::default() };
        let h = train(model.as_mut(), &data, Some(&data[..4]), &cfg, |_| {}).unwrap();
        (h, model.params().clone())
    };
    let (h1, p1) = run();
    let (h2, p2) = run();
    assert_eq!(h1, h2);
    assert_eq!(p1, p2);
}

/// With flip augmentation, mirrored evaluation data scores like the original.
#[test]
fn flip_augmented_model_is_mirror_consistent() {
    let cfg = SynthesisConfig::new(4, 130, 3, 17);
    let data = generate_dataset(&cfg).unwrap();
    let pipe = FeaturePipeline::new(FeatureConfig { flip_mode: FlipMode::All, ..FeatureConfig::default() });
    let subset: Vec<LabeledSample> = data.iter().step_by(4).cloned().collect();
    let train_set = prepare_samples(&pipe, &subset).unwrap();
    let f = train_set[0].features.cols();
    let mut model = build_model(&small_bilstm(f, 4), &mut Rng::new(2)).unwrap();
    let tc = TrainConfig { batch_size: 16, epochs: 8, seed: 5, ..TrainConfig::default() };
    train(model.as_mut(), &train_set, None, &tc, |_| {}).unwrap();

    let mirrored: Vec<LabeledSample> = data
        .iter()
        .map(|s| LabeledSample {
            pose: flip_horizontal(&s.pose, &pipe.mirror).unwrap(),
            ..s.clone()
        })
        .collect();
    let original = evaluate(model.as_ref(), &prepare_samples(&pipe, &data).unwrap()).unwrap();
    let flipped = evaluate(model.as_ref(), &prepare_samples(&pipe, &mirrored).unwrap()).unwrap();
    assert!(data.len() >= 500);
    assert!(original.accuracy > 0.5, "model failed to learn: {}", original.accuracy);
    assert!(
        (original.accuracy - flipped.accuracy).abs() <= 0.02,
        "original {} mirrored {}",
        original.accuracy,
        flipped.accuracy
    );
}
