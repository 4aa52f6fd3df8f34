use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{load_tensor, npy, pool, EmbeddingSet, PoolMethod, Role};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub clip_id: String,
    pub path: PathBuf,
    #[serde(default)]
    pub level: Option<i64>,
    #[serde(default)]
    pub system: Option<String>,
}

/// A corpus listing: one tensor file per clip, all of dimension `dimension`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dimension: usize,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Checks id uniqueness and file existence.
    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::Data("manifest dimension must be at least 1".into()));
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.clip_id.as_str()) {
                return Err(Error::Data(format!("duplicate clip_id '{}'", e.clip_id)));
            }
            if !e.path.is_file() {
                return Err(Error::Data(format!("missing file {}", e.path.display()))
                    .for_clip(&e.clip_id));
            }
        }
        Ok(())
    }

    /// Reads a manifest JSON file. Relative entry paths resolve against the manifest's directory.
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for e in &mut manifest.entries {
            if e.path.is_relative() {
                e.path = base.join(&e.path);
            }
        }
        manifest.validate()?;
        Ok(manifest)
    }
}

/// Pools every manifest entry into one row, preserving manifest order.
pub fn assemble_set(
    manifest: &Manifest,
    method: PoolMethod,
    role: Role,
    label: &str,
) -> Result<EmbeddingSet> {
    let d = manifest.dimension;
    let rows = manifest
        .entries
        .par_iter()
        .map(|e| {
            let seq = load_tensor(&e.path).map_err(|err| err.for_clip(&e.clip_id))?;
            if seq.dim() != d {
                return Err(Error::Data(format!(
                    "dimension {} does not match manifest dimension {d}",
                    seq.dim()
                ))
                .for_clip(&e.clip_id));
            }
            Ok(pool(&seq, method))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut data = Array2::zeros((rows.len(), d));
    for (mut dst, src) in data.rows_mut().into_iter().zip(&rows) {
        dst.assign(src);
    }
    EmbeddingSet::new(data, role, label)
}

/// Loads an embedding set from either a 2-D NPY matrix (rows are clips) or a manifest JSON.
pub fn load_set(path: &Path, method: PoolMethod, role: Role, label: &str) -> Result<EmbeddingSet> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => assemble_set(&Manifest::load(path)?, method, role, label),
        Some("npy") => EmbeddingSet::new(npy::read(path)?, role, label),
        _ => Err(Error::Format(format!(
            "{}: expected a .npy matrix or a .json manifest",
            path.display()
        ))),
    }
}
