//! Embedding tensors: loading, validation, temporal pooling and set assembly.

mod manifest;
pub mod npy;

use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use manifest::{assemble_set, load_set, Manifest, ManifestEntry};

/// Framewise activations of one clip: `T` rows (time) by `d` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    data: Array2<f64>,
    clip_id: String,
}

impl FrameSequence {
    pub fn new(data: Array2<f64>, clip_id: impl Into<String>) -> Result<Self> {
        let (t, d) = data.dim();
        if t == 0 || d == 0 {
            return Err(Error::Data(format!("frame sequence must be non-empty, got {t}x{d}")));
        }
        check_finite(&data)?;
        Ok(FrameSequence {
            data,
            clip_id: clip_id.into(),
        })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn clip_id(&self) -> &str {
        &self.clip_id
    }

    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Reference,
    Candidate,
}

/// An `N x d` matrix of pooled clip embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    data: Array2<f64>,
    role: Role,
    label: String,
}

impl EmbeddingSet {
    pub fn new(data: Array2<f64>, role: Role, label: impl Into<String>) -> Result<Self> {
        let (n, d) = data.dim();
        if n < 2 {
            return Err(Error::InsufficientData(format!(
                "embedding set needs at least 2 rows, got {n}"
            )));
        }
        if d == 0 {
            return Err(Error::Data("embedding dimension must be at least 1".into()));
        }
        check_finite(&data)?;
        // downstream code relies on contiguous rows
        let data = if data.is_standard_layout() {
            data
        } else {
            data.as_standard_layout().into_owned()
        };
        Ok(EmbeddingSet {
            data,
            role,
            label: label.into(),
        })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.data.as_slice().expect("standard layout")[i * d..(i + 1) * d]
    }

    pub fn with_role(mut self, role: Role, label: impl Into<String>) -> Self {
        self.role = role;
        self.label = label.into();
        self
    }

    /// Rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize], label: impl Into<String>) -> Result<Self> {
        EmbeddingSet::new(self.data.select(Axis(0), indices), self.role, label)
    }
}

/// Temporal aggregation applied to a [`FrameSequence`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolMethod {
    Max,
    Mean,
    Last,
    First,
}

impl PoolMethod {
    pub const ALL: [PoolMethod; 4] = [
        PoolMethod::Max,
        PoolMethod::Mean,
        PoolMethod::Last,
        PoolMethod::First,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PoolMethod::Max => "max",
            PoolMethod::Mean => "mean",
            PoolMethod::Last => "last",
            PoolMethod::First => "first",
        }
    }
}

impl FromStr for PoolMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(PoolMethod::Max),
            "mean" => Ok(PoolMethod::Mean),
            "last" => Ok(PoolMethod::Last),
            "first" => Ok(PoolMethod::First),
            other => Err(Error::Domain(format!("unknown pooling method '{other}'"))),
        }
    }
}

pub fn pool(seq: &FrameSequence, method: PoolMethod) -> Array1<f64> {
    let data = seq.data();
    match method {
        PoolMethod::Max => data.fold_axis(Axis(0), f64::NEG_INFINITY, |acc, &v| acc.max(v)),
        PoolMethod::Mean => data.mean_axis(Axis(0)).expect("T >= 1"),
        PoolMethod::Last => data.row(data.nrows() - 1).to_owned(),
        PoolMethod::First => data.row(0).to_owned(),
    }
}

/// Loads an NPY file as a frame sequence; the clip id is the file stem.
pub fn load_tensor(path: &Path) -> Result<FrameSequence> {
    let data = npy::read(path)?;
    let clip_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    FrameSequence::new(data, clip_id)
}

pub fn save_tensor(seq: &FrameSequence, path: &Path) -> Result<()> {
    npy::write(seq.data(), path)
}

pub(crate) fn check_finite(data: &Array2<f64>) -> Result<()> {
    if let Some(((r, c), v)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite value {v} at ({r}, {c})")));
    }
    Ok(())
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
