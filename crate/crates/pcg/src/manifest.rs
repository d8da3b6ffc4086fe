//! The dataset manifest: one entry per noisy recording, with its clean
//! source, subject, partition and the full mixing recipe.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use pcg_core::synth::{MixRecipe, NoiseCategory, Partition};
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// `{subject}_v{variant}`.
    pub id: String,
    /// Relative to the manifest's directory.
    pub noisy: PathBuf,
    pub clean: PathBuf,
    pub subject: String,
    pub partition: Partition,
    pub recipe: MixRecipe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub tool_version: String,
    pub master_seed: u64,
    pub variants_per_clean: usize,
    pub density_scale: f64,
    /// Train, validation and test fractions.
    pub ratios: [f64; 3],
    /// Noise files per category, indexed by `Placement::source`.
    pub noise_sources: BTreeMap<NoiseCategory, Vec<PathBuf>>,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: {detail}")]
    Invalid { path: PathBuf, detail: String },
}

impl DatasetManifest {
    pub fn partition(&self, p: Partition) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.partition == p)
    }

    pub fn find(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), ManifestError> {
        fs::write(path, self.to_json() + "\n").map_err(|source| ManifestError::Io {
            path: path.into(),
            source,
        })
    }

    /// Load and check that every subject lies in a single partition.
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.into(),
            source,
        })?;
        let m: Self = serde_json::from_str(&text).map_err(|source| ManifestError::Json {
            path: path.into(),
            source,
        })?;
        let mut seen: BTreeMap<&str, Partition> = BTreeMap::new();
        for e in &m.entries {
            if let Some(p) = seen.insert(&e.subject, e.partition) {
                if p != e.partition {
                    return Err(ManifestError::Invalid {
                        path: path.into(),
                        detail: format!(
                            "subject `{}` appears in both {} and {}",
                            e.subject,
                            p.label(),
                            e.partition.label()
                        ),
                    });
                }
            }
        }
        Ok(m)
    }
}

/// Directory holding the manifest file at `path`.
pub fn base_dir(path: &Path) -> PathBuf {
    path.parent()
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}
