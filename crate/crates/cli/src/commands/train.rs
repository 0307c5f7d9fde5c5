use super::create_dir;
use crate::args::{ModelKind, TrainArgs};
use crate::manifest::{Manifest, ManifestRow};
use crate::records::*;
use crate::{usage, CliError, CliResult};
use anyhow::Context;
use signkit_core::model::{
    build_model, prepare_samples, train, AdamConfig, BiLstmConfig, FeatureConfig, FeaturePipeline,
    LabeledSample, ModelConfig, ModelError, Split, TrainConfig, TransformerCtcConfig,
};
use signkit_core::synth::signer_disjoint_split;
use signkit_core::tensor::save_checkpoint;
use signkit_core::{NormalizationSpec, Rng};
use std::fs;
use std::io::Write;
use std::path::Path;

/// Stream of the root seed used for parameter initialization; training
/// itself uses streams 1 to 3.
const INIT_STREAM: u64 = 0;

fn check_flags(a: &TrainArgs) -> CliResult<()> {
    if a.epochs == 0 {
        return usage("--epochs must be at least 1");
    }
    if a.batch < 2 {
        return usage("--batch must be at least 2 (batch normalization needs two samples)");
    }
    if !(a.lr.is_finite() && a.lr > 0.0) {
        return usage(format!("--lr {} must be positive", a.lr));
    }
    if !(a.train_fraction > 0.0 && a.train_fraction <= 1.0) {
        return usage(format!("--train-fraction {} must lie in (0, 1]", a.train_fraction));
    }
    if let Some(d) = a.dropout {
        if !(0.0..1.0).contains(&d) {
            return usage(format!("--dropout {d} must lie in [0, 1)"));
        }
    }
    Ok(())
}

fn model_config(a: &TrainArgs, input_dim: usize, classes: usize) -> ModelConfig {
    match a.model {
        ModelKind::Bilstm => ModelConfig::Bilstm(BiLstmConfig {
            input_dim,
            projection_dim: a.projection_dim,
            lstm_hidden: a.lstm_hidden,
            lstm_layers: a.lstm_layers,
            dropout: a.dropout.unwrap_or(0.2),
            classes,
        }),
        ModelKind::TransformerCtc => ModelConfig::TransformerCtc(TransformerCtcConfig {
            input_dim,
            d_model: a.d_model,
            heads: a.heads,
            blocks: a.blocks,
            ff_dim: a.ff_dim,
            dropout: a.dropout.unwrap_or(0.1),
            classes,
            beam_width: a.beam_width,
        }),
    }
}

/// Writes a split manifest whose paths are absolute, so it works from any directory.
fn write_split(path: &Path, source: &Manifest, samples: &[LabeledSample]) -> anyhow::Result<()> {
    let by_id: std::collections::HashMap<&str, &ManifestRow> =
        source.rows.iter().map(|r| (r.sample_id.as_str(), r)).collect();
    let rows = samples
        .iter()
        .map(|s| {
            let row = by_id[s.sample_id.as_str()];
            let abs = fs::canonicalize(source.path_of(row))
                .with_context(|| format!("sample {}: resolving path", row.sample_id))?;
            Ok(ManifestRow {
                file_path: abs.to_string_lossy().into_owned(),
                ..row.clone()
            })
        })
        .collect::<anyhow::Result<_>>()?;
    Manifest {
        base: path.parent().unwrap_or(Path::new(".")).to_path_buf(),
        rows,
    }
    .write(path)
}

fn model_error(e: ModelError) -> CliError {
    match e {
        ModelError::InvalidConfig(m) => CliError::Usage(m),
        other => CliError::Data(other.into()),
    }
}

pub fn run(a: TrainArgs) -> CliResult<()> {
    check_flags(&a)?;
    let manifest = Manifest::read(&a.manifest)?;
    let samples = manifest.load_samples()?;
    if samples.is_empty() {
        return Err(CliError::Data(anyhow::anyhow!("{} has no samples", a.manifest.display())));
    }
    let (train_set, val_set) = match &a.val_manifest {
        Some(path) => (samples, Some(Manifest::read(path)?.load_samples()?)),
        None if a.train_fraction < 1.0 => {
            let (t, v) = signer_disjoint_split(&samples, a.train_fraction, a.seed)
                .map_err(anyhow::Error::from)?;
            (t, Some(v))
        }
        None => (samples, None),
    };
    create_dir(&a.out)?;
    if a.val_manifest.is_none() && val_set.is_some() {
        write_split(&a.out.join(SPLIT_TRAIN_FILE), &manifest, &train_set)?;
        write_split(&a.out.join(SPLIT_VALIDATION_FILE), &manifest, val_set.as_deref().unwrap_or(&[]))?;
    }

    let features = FeatureConfig {
        normalization: (!a.no_normalize).then(NormalizationSpec::default),
        flip_mode: a.flip_mode.into(),
        ..FeatureConfig::default()
    };
    let pipeline = FeaturePipeline::new(features.clone());
    let train_prepared = prepare_samples(&pipeline, &train_set).map_err(anyhow::Error::from)?;
    let val_prepared = match &val_set {
        Some(v) => Some(prepare_samples(&pipeline, v).map_err(anyhow::Error::from)?),
        None => None,
    };
    let classes = train_set
        .iter()
        .chain(val_set.iter().flatten())
        .map(|s| s.label)
        .max()
        .unwrap_or(0)
        + 1;
    let input_dim = train_prepared[0].features.cols();
    let config = model_config(&a, input_dim, classes);
    let mut model = build_model(&config, &mut Rng::new(a.seed).derive(INIT_STREAM)).map_err(model_error)?;

    let train_cfg = TrainConfig {
        batch_size: a.batch,
        epochs: a.epochs,
        seed: a.seed,
        adam: AdamConfig {
            learning_rate: a.lr,
            ..AdamConfig::default()
        },
        shuffle: !a.no_shuffle,
    };
    let history_path = a.out.join(HISTORY_FILE);
    let mut history = fs::File::create(&history_path)
        .with_context(|| format!("creating {}", history_path.display()))?;
    let mut write_err = None;
    let records = train(
        model.as_mut(),
        &train_prepared,
        val_prepared.as_deref(),
        &train_cfg,
        |rec| {
            eprintln!(
                "epoch {:>3} {:<10} loss {:.4} accuracy {:.4}",
                rec.epoch,
                match rec.split {
                    Split::Train => "train",
                    Split::Validation => "validation",
                },
                rec.loss,
                rec.accuracy
            );
            let line = serde_json::to_string(rec).expect("history record serializes");
            if let Err(e) = writeln!(history, "{line}") {
                write_err.get_or_insert(e);
            }
        },
    )
    .map_err(model_error)?;
    if let Some(e) = write_err {
        return Err(CliError::Data(anyhow::Error::from(e).context("writing history")));
    }

    let ckpt = a.out.join(CHECKPOINT_FILE);
    fs::write(&ckpt, save_checkpoint(model.params()))
        .with_context(|| format!("writing {}", ckpt.display()))?;
    RunConfig {
        model: config,
        features,
    }
    .write(&a.out.join(MODEL_FILE))?;

    let last = |split: Split| records.iter().rev().find(|r| r.split == split);
    match last(Split::Validation) {
        Some(r) => println!("final validation accuracy {:.4}", r.accuracy),
        None => {
            let r = last(Split::Train).expect("at least one epoch");
            println!("final train accuracy {:.4}", r.accuracy);
        }
    }
    Ok(())
}
