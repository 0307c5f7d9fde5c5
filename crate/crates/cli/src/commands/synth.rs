use super::create_dir;
use crate::args::SynthArgs;
use crate::manifest::Manifest;
use crate::{usage, CliError, CliResult};
use anyhow::Context;
use signkit_core::synth::{generate_dataset, SynthError, SynthesisConfig};

pub const SYNTH_CONFIG_FILE: &str = "synth.json";

pub fn run(a: SynthArgs) -> CliResult<()> {
    let mut cfg = SynthesisConfig::new(a.classes, a.samples, a.signers, a.seed);
    for s in &mut cfg.signers {
        s.noise_sd = a.noise_sd;
    }
    cfg.frames = (a.min_frames, a.max_frames);
    cfg.detection_miss_rate = a.miss_rate;
    if a.samples == 0 {
        return usage("--samples must be at least 1");
    }
    if let Err(e) = cfg.validate() {
        return match e {
            SynthError::InvalidConfig(m) => usage(m),
            other => Err(CliError::Data(other.into())),
        };
    }
    let samples = generate_dataset(&cfg).map_err(anyhow::Error::from)?;
    create_dir(&a.out)?;
    Manifest::write_dataset(&a.out, &samples)?;
    let path = a.out.join(SYNTH_CONFIG_FILE);
    let mut text = serde_json::to_string_pretty(&cfg).map_err(anyhow::Error::from)?;
    text.push('\n');
    std::fs::write(&path, text)
        .with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {} samples to {}", samples.len(), a.out.display());
    Ok(())
}
