//! `manifest.csv`: one row per sample, paths relative to the manifest's directory.

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use signkit_core::model::LabeledSample;
use signkit_core::pose::{parse_pose_file, serialize_pose};
use signkit_core::PoseSequence;
use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const SAMPLES_DIR: &str = "samples";
pub const POSE_EXTENSION: &str = "pose";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub sample_id: String,
    pub file_path: String,
    pub class_id: usize,
    pub signer_id: String,
}

#[derive(Debug, Clone)]
pub struct Manifest {
    /// Directory that `file_path` entries are relative to.
    pub base: PathBuf,
    pub rows: Vec<ManifestRow>,
}

pub(crate) fn csv_writer(path: &Path) -> anyhow::Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

impl Manifest {
    pub fn read(path: &Path) -> anyhow::Result<Manifest> {
        let mut reader = csv::Reader::from_path(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        let mut rows = Vec::new();
        let mut seen = HashSet::new();
        for (i, rec) in reader.deserialize::<ManifestRow>().enumerate() {
            let row = rec.with_context(|| format!("{}: row {}", path.display(), i + 1))?;
            if !seen.insert(row.sample_id.clone()) {
                bail!("{}: duplicate sample_id {}", path.display(), row.sample_id);
            }
            rows.push(row);
        }
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Manifest { base, rows })
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let mut w = csv_writer(path)?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record(["sample_id", "file_path", "class_id", "signer_id"])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn path_of(&self, row: &ManifestRow) -> PathBuf {
        self.base.join(&row.file_path)
    }

    pub fn read_pose(&self, row: &ManifestRow) -> anyhow::Result<PoseSequence> {
        let path = self.path_of(row);
        let bytes = fs::read(&path)
            .with_context(|| format!("sample {}: reading {}", row.sample_id, path.display()))?;
        parse_pose_file(&bytes)
            .with_context(|| format!("sample {}: parsing {}", row.sample_id, path.display()))
    }

    /// Loads every sample in parallel; order follows the manifest.
    pub fn load_samples(&self) -> anyhow::Result<Vec<LabeledSample>> {
        self.rows
            .par_iter()
            .map(|row| {
                Ok(LabeledSample {
                    sample_id: row.sample_id.clone(),
                    pose: self.read_pose(row)?,
                    label: row.class_id,
                    signer_id: row.signer_id.clone(),
                })
            })
            .collect()
    }

    /// Writes `samples` as SPS1 files under `dir/samples/` plus `dir/manifest.csv`.
    pub fn write_dataset(dir: &Path, samples: &[LabeledSample]) -> anyhow::Result<Manifest> {
        let sample_dir = dir.join(SAMPLES_DIR);
        fs::create_dir_all(&sample_dir)
            .with_context(|| format!("creating {}", sample_dir.display()))?;
        let rows: Vec<ManifestRow> = samples
            .par_iter()
            .map(|s| {
                let rel = format!("{SAMPLES_DIR}/{}.{POSE_EXTENSION}", s.sample_id);
                let path = dir.join(&rel);
                fs::write(&path, serialize_pose(&s.pose))
                    .with_context(|| format!("writing {}", path.display()))?;
                Ok(ManifestRow {
                    sample_id: s.sample_id.clone(),
                    file_path: rel,
                    class_id: s.label,
                    signer_id: s.signer_id.clone(),
                })
            })
            .collect::<anyhow::Result<_>>()?;
        let manifest = Manifest {
            base: dir.to_path_buf(),
            rows,
        };
        manifest.write(&dir.join(MANIFEST_FILE))?;
        Ok(manifest)
    }
}
