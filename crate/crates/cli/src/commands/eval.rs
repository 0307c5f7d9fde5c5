use super::create_dir;
use crate::args::EvalArgs;
use crate::manifest::Manifest;
use crate::records::*;
use crate::{usage, CliResult};
use anyhow::Context;
use signkit_core::model::{build_model, evaluate, prepare_samples, FeaturePipeline};
use signkit_core::tensor::load_checkpoint;
use signkit_core::Rng;
use std::fs;

pub fn run(a: EvalArgs) -> CliResult<()> {
    let (config_path, ckpt_path) = match (&a.run, &a.config, &a.checkpoint) {
        (_, Some(c), Some(k)) => (c.clone(), k.clone()),
        (Some(run), c, k) => (
            c.clone().unwrap_or_else(|| run.join(MODEL_FILE)),
            k.clone().unwrap_or_else(|| run.join(CHECKPOINT_FILE)),
        ),
        _ => return usage("give --run, or both --config and --checkpoint"),
    };
    let run_cfg = RunConfig::read(&config_path)?;
    let mut model = build_model(&run_cfg.model, &mut Rng::new(0))
        .map_err(anyhow::Error::from)
        .with_context(|| format!("building the model described by {}", config_path.display()))?;
    let bytes = fs::read(&ckpt_path).with_context(|| format!("reading {}", ckpt_path.display()))?;
    load_checkpoint(&bytes, model.params_mut())
        .with_context(|| format!("loading {} into the model of {}", ckpt_path.display(), config_path.display()))?;

    let manifest = Manifest::read(&a.manifest)?;
    let samples = manifest.load_samples()?;
    let pipeline = FeaturePipeline::new(run_cfg.features);
    let prepared = prepare_samples(&pipeline, &samples).map_err(anyhow::Error::from)?;
    let result = evaluate(model.as_ref(), &prepared).map_err(anyhow::Error::from)?;
    create_dir(&a.out)?;
    write_outcomes(&a.out.join(OUTCOMES_FILE), &result.outcomes)?;
    println!("accuracy {:.4}", result.accuracy);
    Ok(())
}
