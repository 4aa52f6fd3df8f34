//! Unbiased squared MMD with a Gaussian RBF kernel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::score::{DivergenceScore, Metric};
use crate::tensor::{sq_dist, EmbeddingSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "sigma")]
pub enum Bandwidth {
    MedianHeuristic,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmdConfig {
    pub bandwidth: Bandwidth,
    pub clamp_negative: bool,
}

impl Default for MmdConfig {
    fn default() -> Self {
        MmdConfig {
            bandwidth: Bandwidth::MedianHeuristic,
            clamp_negative: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianBandwidth {
    pub sigma: f64,
    /// All pooled points coincide; `sigma` fell back to 1.
    pub degenerate: bool,
}

/// Median pairwise Euclidean distance over the pooled sample (distinct unordered pairs).
pub fn median_bandwidth(x: &EmbeddingSet, y: &EmbeddingSet) -> MedianBandwidth {
    let rows: Vec<&[f64]> = (0..x.len())
        .map(|i| x.row(i))
        .chain((0..y.len()).map(|i| y.row(i)))
        .collect();
    let n = rows.len();
    // squared distances; sqrt is monotone so selection can happen before it
    let mut d2: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let rows = &rows;
            (i + 1..n).map(move |j| sq_dist(rows[i], rows[j]))
        })
        .collect();
    if d2.is_empty() {
        return MedianBandwidth {
            sigma: 1.0,
            degenerate: true,
        };
    }
    let m = d2.len();
    let mid = m / 2;
    let (_, upper, _) = d2.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = upper.sqrt();
    let median = if m % 2 == 1 {
        upper
    } else {
        let lower = d2[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max).sqrt();
        0.5 * (lower + upper)
    };
    if median > 0.0 {
        MedianBandwidth {
            sigma: median,
            degenerate: false,
        }
    } else {
        MedianBandwidth {
            sigma: 1.0,
            degenerate: true,
        }
    }
}

/// Per-row kernel sums collected in row order, then reduced sequentially,
/// so the total does not depend on the thread schedule.
fn kernel_sum(a: &EmbeddingSet, b: &EmbeddingSet, gamma: f64, skip_diagonal: bool) -> f64 {
    let row_sums: Vec<f64> = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let ai = a.row(i);
            let mut s = 0.0;
            for j in 0..b.len() {
                if skip_diagonal && i == j {
                    continue;
                }
                s += (-gamma * sq_dist(ai, b.row(j))).exp();
            }
            s
        })
        .collect();
    row_sums.iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmdEstimate {
    pub signed: f64,
    pub sigma: f64,
    pub degenerate_bandwidth: bool,
}

pub fn mmd2_estimate(x: &EmbeddingSet, y: &EmbeddingSet, bandwidth: Bandwidth) -> Result<MmdEstimate> {
    let (m, n) = (x.len(), y.len());
    if m < 2 || n < 2 {
        return Err(Error::InsufficientData(format!(
            "unbiased MMD needs at least 2 points per set, got {m} and {n}"
        )));
    }
    if x.dim() != y.dim() {
        return Err(Error::Domain(format!(
            "dimension mismatch: {} vs {}",
            x.dim(),
            y.dim()
        )));
    }
    let (sigma, degenerate_bandwidth) = match bandwidth {
        Bandwidth::Fixed(s) if s > 0.0 && s.is_finite() => (s, false),
        Bandwidth::Fixed(s) => {
            return Err(Error::Domain(format!("bandwidth must be positive, got {s}")))
        }
        Bandwidth::MedianHeuristic => {
            let b = median_bandwidth(x, y);
            (b.sigma, b.degenerate)
        }
    };
    let gamma = 1.0 / (2.0 * sigma * sigma);
    let (mf, nf) = (m as f64, n as f64);
    let kxx = kernel_sum(x, x, gamma, true) / (mf * (mf - 1.0));
    let kyy = kernel_sum(y, y, gamma, true) / (nf * (nf - 1.0));
    let kxy = kernel_sum(x, y, gamma, false) / (mf * nf);
    Ok(MmdEstimate {
        signed: kxx + kyy - 2.0 * kxy,
        sigma,
        degenerate_bandwidth,
    })
}

pub fn mmd2_unbiased(x: &EmbeddingSet, y: &EmbeddingSet, cfg: &MmdConfig) -> Result<DivergenceScore> {
    let est = mmd2_estimate(x, y, cfg.bandwidth)?;
    let value = if cfg.clamp_negative {
        est.signed.max(0.0)
    } else {
        est.signed
    };
    let config = json!({
        "bandwidth": cfg.bandwidth,
        "clamp_negative": cfg.clamp_negative,
        "sigma": est.sigma,
        "kernel": "gaussian-rbf",
    });
    let mut score = DivergenceScore::new(Metric::Mmd, value, config, x.len(), y.len());
    if est.degenerate_bandwidth {
        score.flags.push("degenerate-bandwidth".into());
    }
    if value < 0.0 {
        score.flags.push("negative-unbiased-estimate".into());
    }
    Ok(score)
}
