use super::create_dir;
use crate::args::OccludeArgs;
use crate::manifest::Manifest;
use crate::{usage, CliResult};
use anyhow::Context;
use rayon::prelude::*;
use serde::Serialize;
use signkit_core::model::LabeledSample;
use signkit_core::synth::{apply_occlusion, OcclusionMode, OcclusionSpec, OcclusionTarget};
use signkit_core::Rng;
use std::fs;

pub const OCCLUSION_FILE: &str = "occlusion.json";

#[derive(Serialize)]
struct OcclusionRecord<'a> {
    mode: OcclusionMode,
    target: OcclusionTarget,
    fraction: f64,
    sample_fraction: f64,
    seed: u64,
    occluded: Vec<&'a str>,
}

pub fn run(a: OccludeArgs) -> CliResult<()> {
    if !(0.0..=1.0).contains(&a.fraction) {
        return usage(format!("--fraction {} must lie in [0, 1]", a.fraction));
    }
    if !(0.0..=1.0).contains(&a.sample_fraction) {
        return usage(format!("--sample-fraction {} must lie in [0, 1]", a.sample_fraction));
    }
    let manifest = Manifest::read(&a.manifest)?;
    create_dir(&a.out)?;
    let same_dir = match (fs::canonicalize(&a.out), fs::canonicalize(&manifest.base)) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    };
    if same_dir {
        return usage("--out must differ from the source dataset directory");
    }
    let samples = manifest.load_samples()?;

    let n = samples.len();
    let mut order: Vec<usize> = (0..n).collect();
    let root = Rng::new(a.seed);
    root.derive(0).shuffle(&mut order);
    let mut affected = vec![false; n];
    for &i in &order[..(a.sample_fraction * n as f64).round() as usize] {
        affected[i] = true;
    }
    let per_sample = root.derive(1);
    let output: Vec<LabeledSample> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            if !affected[i] {
                return Ok(s.clone());
            }
            let spec = OcclusionSpec {
                mode: a.mode.into(),
                target: a.target.into(),
                fraction: a.fraction,
                seed: per_sample.derive(i as u64).next_u64(),
            };
            let pose = apply_occlusion(&s.pose, &spec)
                .with_context(|| format!("sample {}: occluding", s.sample_id))?;
            Ok(LabeledSample { pose, ..s.clone() })
        })
        .collect::<anyhow::Result<_>>()?;
    Manifest::write_dataset(&a.out, &output)?;

    let record = OcclusionRecord {
        mode: a.mode.into(),
        target: a.target.into(),
        fraction: a.fraction,
        sample_fraction: a.sample_fraction,
        seed: a.seed,
        occluded: (0..n).filter(|&i| affected[i]).map(|i| samples[i].sample_id.as_str()).collect(),
    };
    let path = a.out.join(OCCLUSION_FILE);
    let mut text = serde_json::to_string_pretty(&record).map_err(anyhow::Error::from)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    println!(
        "occluded {} of {} samples into {}",
        record.occluded.len(),
        n,
        a.out.display()
    );
    Ok(())
}
