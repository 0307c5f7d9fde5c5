pub mod analyze;
pub mod eval;
pub mod occlude;
pub mod synth;
pub mod train;

use anyhow::Context;
use std::path::Path;

pub(crate) fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}
