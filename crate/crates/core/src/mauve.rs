//! MAUVE divergence frontiers over k-means histograms, and MAD = -ln(MAUVE).

use std::collections::HashSet;

use nalgebra::DMatrix;
use ndarray::{concatenate, Array2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::rng::keyed_rng;
use crate::score::{DivergenceScore, Metric};
use crate::tensor::{sq_dist, EmbeddingSet};

const KMEANS_STREAM: u64 = 0x6b6d_6561_6e73;
/// Lloyd iterations stop once no centroid moves farther than this.
pub const CENTROID_TOL: f64 = 1e-6;
pub const MAX_AUTO_CLUSTERS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "k")]
pub enum ClusterCount {
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MauveConfig {
    pub num_clusters: ClusterCount,
    pub scale_c: f64,
    pub grid_size: usize,
    pub seed: u64,
    pub kmeans_restarts: usize,
    pub max_iters: usize,
    /// Project onto this many principal components before clustering.
    pub pca_dims: Option<usize>,
}

impl MauveConfig {
    pub fn with_seed(seed: u64) -> Self {
        MauveConfig {
            num_clusters: ClusterCount::Auto,
            scale_c: 5.0,
            grid_size: 25,
            seed,
            kmeans_restarts: 3,
            max_iters: 300,
            pca_dims: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ClusterCount::Fixed(k) = self.num_clusters {
            if k < 2 {
                return Err(Error::Domain(format!("cluster count must be >= 2, got {k}")));
            }
        }
        if !(self.scale_c > 0.0 && self.scale_c.is_finite()) {
            return Err(Error::Domain(format!("scale c must be positive, got {}", self.scale_c)));
        }
        if self.grid_size < 3 {
            return Err(Error::Domain(format!("grid size must be >= 3, got {}", self.grid_size)));
        }
        if self.kmeans_restarts == 0 || self.max_iters == 0 {
            return Err(Error::Domain("k-means restarts and iterations must be >= 1".into()));
        }
        if self.pca_dims == Some(0) {
            return Err(Error::Domain("PCA dimension must be >= 1".into()));
        }
        Ok(())
    }

    /// `max(2, floor(n / 10))`, capped at 500.
    pub fn auto_clusters(n_points: usize) -> usize {
        (n_points / 10).clamp(2, MAX_AUTO_CLUSTERS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansConfig {
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Array2<f64>,
    /// Within-cluster sum of squared distances.
    pub wcss: f64,
    pub iterations: usize,
    pub restart: usize,
}

pub fn count_distinct_rows(points: &Array2<f64>) -> usize {
    points
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|v| (v + 0.0).to_bits()).collect::<Vec<u64>>())
        .collect::<HashSet<_>>()
        .len()
}

/// Nearest centroid (lowest index on ties) and the squared distance to it.
fn nearest(p: &[f64], centroids: &[f64], d: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, cen) in centroids.chunks_exact(d).enumerate() {
        let mut s = 0.0;
        for (a, b) in p.iter().zip(cen) {
            s += (a - b) * (a - b);
            if s >= best.1 {
                break;
            }
        }
        if s < best.1 {
            best = (c, s);
        }
    }
    best
}

fn assign(points: &[f64], centroids: &[f64], d: usize) -> Vec<(usize, f64)> {
    points
        .par_chunks_exact(d)
        .map(|p| nearest(p, centroids, d))
        .collect()
}

fn plus_plus_seed<R: Rng>(points: &[f64], n: usize, d: usize, k: usize, rng: &mut R) -> Vec<f64> {
    let mut centroids = Vec::with_capacity(k * d);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(&points[first * d..(first + 1) * d]);
    let mut d2: Vec<f64> = points
        .chunks_exact(d)
        .map(|p| sq_dist(p, &centroids[..d]))
        .collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // rounding can leave target just above the final partial sum
            chosen.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("total > 0"))
        } else {
            rng.random_range(0..n)
        };
        let c = &points[pick * d..(pick + 1) * d];
        for (w, p) in d2.iter_mut().zip(points.chunks_exact(d)) {
            *w = w.min(sq_dist(p, c));
        }
        centroids.extend_from_slice(c);
    }
    centroids
}

fn lloyd(points: &[f64], n: usize, d: usize, k: usize, cfg: &KMeansConfig, restart: usize) -> KMeansResult {
    let mut rng = keyed_rng(cfg.seed, &[KMEANS_STREAM, restart as u64]);
    let mut centroids = plus_plus_seed(points, n, d, k, &mut rng);
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let labels = assign(points, &centroids, d);
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for (p, &(c, _)) in points.chunks_exact(d).zip(&labels) {
            counts[c] += 1;
            for (s, v) in sums[c * d..(c + 1) * d].iter_mut().zip(p) {
                *s += v;
            }
        }
        // empty clusters take the points farthest from their current centroid
        let empties: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
        if !empties.is_empty() {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| labels[b].1.total_cmp(&labels[a].1).then(a.cmp(&b)));
            for (c, &i) in empties.iter().zip(&order) {
                let (old, _) = labels[i];
                counts[old] -= 1;
                let p = &points[i * d..(i + 1) * d];
                for (s, v) in sums[old * d..(old + 1) * d].iter_mut().zip(p) {
                    *s -= v;
                }
                counts[*c] = 1;
                sums[*c * d..(*c + 1) * d].copy_from_slice(p);
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                // donor cluster emptied by a re-seed; keep its centroid
                continue;
            }
            let inv = 1.0 / counts[c] as f64;
            let mut moved = 0.0;
            for j in 0..d {
                let new = sums[c * d + j] * inv;
                let old = centroids[c * d + j];
                moved += (new - old) * (new - old);
                centroids[c * d + j] = new;
            }
            shift = shift.max(moved.sqrt());
        }
        if shift < CENTROID_TOL {
            break;
        }
    }
    let labels = assign(points, &centroids, d);
    KMeansResult {
        assignments: labels.iter().map(|l| l.0).collect(),
        wcss: labels.iter().map(|l| l.1).sum(),
        centroids: Array2::from_shape_vec((k, d), centroids).expect("k*d centroids"),
        iterations,
        restart,
    }
}

/// Seeded k-means++ with Lloyd refinement; best of `cfg.restarts` by WCSS.
pub fn kmeans(points: &Array2<f64>, k: usize, cfg: &KMeansConfig) -> Result<KMeansResult> {
    let (n, d) = points.dim();
    if k < 2 {
        return Err(Error::Domain(format!("k-means needs k >= 2, got {k}")));
    }
    let distinct = count_distinct_rows(points);
    if k > distinct {
        return Err(Error::Domain(format!(
            "k = {k} exceeds the {distinct} distinct points"
        )));
    }
    if cfg.restarts == 0 || cfg.max_iters == 0 {
        return Err(Error::Domain("k-means restarts and iterations must be >= 1".into()));
    }
    let owned;
    let flat = match points.as_slice() {
        Some(s) => s,
        None => {
            owned = points.as_standard_layout().into_owned();
            owned.as_slice().expect("standard layout")
        }
    };
    let runs: Vec<KMeansResult> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| lloyd(flat, n, d, k, cfg, r))
        .collect();
    Ok(runs
        .into_iter()
        .reduce(|best, r| if r.wcss < best.wcss { r } else { best })
        .expect("restarts >= 1"))
}

/// Normalized cluster histograms of the first `split` (reference) and remaining (candidate) points.
pub fn histograms(assignments: &[usize], split: usize, k: usize) -> (Vec<f64>, Vec<f64>) {
    let count = |labels: &[usize]| {
        let mut h = vec![0.0; k];
        for &l in labels {
            h[l] += 1.0;
        }
        let total = labels.len() as f64;
        h.iter_mut().for_each(|v| *v /= total);
        h
    };
    let (p, q) = assignments.split_at(split);
    (count(p), count(q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Mixture weight on the reference histogram; `None` for the two anchors.
    pub lambda: Option<f64>,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceCurve {
    pub points: Vec<CurvePoint>,
}

/// `KL(a || r)` with the convention `0 ln(0/x) = 0`.
fn kl(a: &[f64], r: &[f64]) -> f64 {
    a.iter()
        .zip(r)
        .filter(|(&ab, _)| ab > 0.0)
        .map(|(&ab, &rb)| {
            assert!(rb > 0.0, "mixture must cover the support of its components");
            ab * (ab / rb).ln()
        })
        .sum()
}

/// Frontier points `(exp(-c KL(q||R)), exp(-c KL(p||R)))` over `R = lambda p + (1-lambda) q`
/// for `grid_size` evenly spaced `lambda` strictly inside (0, 1), plus the (0,1) and (1,0) anchors,
/// sorted by x ascending.
pub fn divergence_curve(p: &[f64], q: &[f64], c: f64, grid_size: usize) -> Result<DivergenceCurve> {
    if p.len() != q.len() {
        return Err(Error::Domain(format!(
            "histograms have {} and {} bins",
            p.len(),
            q.len()
        )));
    }
    let mut points: Vec<CurvePoint> = (1..=grid_size)
        .map(|i| {
            let lambda = i as f64 / (grid_size as f64 + 1.0);
            // q + lambda (p - q) reproduces shared bins exactly
            let mix: Vec<f64> = p
                .iter()
                .zip(q)
                .map(|(pb, qb)| qb + lambda * (pb - qb))
                .collect();
            CurvePoint {
                lambda: Some(lambda),
                x: (-c * kl(q, &mix)).exp(),
                y: (-c * kl(p, &mix)).exp(),
            }
        })
        .collect();
    points.push(CurvePoint {
        lambda: None,
        x: 0.0,
        y: 1.0,
    });
    points.push(CurvePoint {
        lambda: None,
        x: 1.0,
        y: 0.0,
    });
    // y descending among equal x keeps the staircase shape of the frontier
    points.sort_by(|a, b| a.x.total_cmp(&b.x).then(b.y.total_cmp(&a.y)));
    Ok(DivergenceCurve { points })
}

/// Trapezoid-rule area under the x-sorted curve.
pub fn mauve_score(curve: &DivergenceCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].x - w[0].x) * (w[0].y + w[1].y) * 0.5)
        .sum()
}

fn pca_project(points: &Array2<f64>, dims: usize) -> Result<Array2<f64>> {
    let (n, d) = points.dim();
    if dims > d {
        return Err(Error::Domain(format!(
            "cannot project {d}-dimensional data onto {dims} components"
        )));
    }
    let flat = points.as_standard_layout();
    let x = DMatrix::from_row_slice(n, d, flat.as_slice().expect("standard layout"));
    let mean = x.row_mean();
    let mut centered = x;
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let cov = centered.tr_mul(&centered) / (n as f64 - 1.0);
    let cov = (&cov + cov.transpose()) * 0.5;
    let eig = cov
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("PCA eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let basis = DMatrix::from_fn(d, dims, |r, c| eig.eigenvectors[(r, order[c])]);
    let projected = centered * basis;
    Ok(Array2::from_shape_fn((n, dims), |(i, j)| projected[(i, j)]))
}

/// Full MAUVE computation with its intermediate products.
#[derive(Debug, Clone, PartialEq)]
pub struct MauveOutput {
    pub mauve: f64,
    pub mad: f64,
    pub curve: DivergenceCurve,
    pub clusters: usize,
    pub p_hist: Vec<f64>,
    pub q_hist: Vec<f64>,
    pub kmeans: KMeansResult,
}

pub fn mauve(reference: &EmbeddingSet, generated: &EmbeddingSet, cfg: &MauveConfig) -> Result<MauveOutput> {
    cfg.validate()?;
    if reference.dim() != generated.dim() {
        return Err(Error::Domain(format!(
            "dimension mismatch: {} vs {}",
            reference.dim(),
            generated.dim()
        )));
    }
    let pooled = concatenate(Axis(0), &[reference.data().view(), generated.data().view()])
        .expect("matching column counts");
    let distinct = count_distinct_rows(&pooled);
    if distinct < 2 {
        return Err(Error::Data("pooled data has rank 0 (all points identical)".into()));
    }
    let pooled = match cfg.pca_dims {
        Some(m) => pca_project(&pooled, m)?,
        None => pooled,
    };
    let clusters = match cfg.num_clusters {
        ClusterCount::Auto => MauveConfig::auto_clusters(pooled.nrows()).min(count_distinct_rows(&pooled)),
        ClusterCount::Fixed(k) => k,
    };
    if clusters < 2 {
        return Err(Error::Data("projected data collapsed to a single point".into()));
    }
    let km = kmeans(
        &pooled,
        clusters,
        &KMeansConfig {
            seed: cfg.seed,
            restarts: cfg.kmeans_restarts,
            max_iters: cfg.max_iters,
        },
    )?;
    let (p_hist, q_hist) = histograms(&km.assignments, reference.len(), clusters);
    let curve = divergence_curve(&p_hist, &q_hist, cfg.scale_c, cfg.grid_size)?;
    let mauve = mauve_score(&curve);
    Ok(MauveOutput {
        mauve,
        mad: mad_from_mauve(mauve),
        curve,
        clusters,
        p_hist,
        q_hist,
        kmeans: km,
    })
}

/// `-ln(mauve)`, floored at zero so rounding above 1 cannot go negative.
pub fn mad_from_mauve(mauve: f64) -> f64 {
    (-mauve.ln()).max(0.0)
}

impl MauveOutput {
    fn snapshot(&self, cfg: &MauveConfig) -> serde_json::Value {
        json!({
            "mauve_config": cfg,
            "clusters": self.clusters,
            "kmeans_wcss": self.kmeans.wcss,
            "kmeans_restart": self.kmeans.restart,
            "mauve": self.mauve,
        })
    }

    pub fn mad_score(&self, cfg: &MauveConfig, n_ref: usize, n_gen: usize) -> DivergenceScore {
        DivergenceScore::new(Metric::Mad, self.mad, self.snapshot(cfg), n_ref, n_gen)
    }

    pub fn mauve_score(&self, cfg: &MauveConfig, n_ref: usize, n_gen: usize) -> DivergenceScore {
        DivergenceScore::new(Metric::Mauve, self.mauve, self.snapshot(cfg), n_ref, n_gen)
    }
}

/// MAD between a reference and a candidate set (lower is better).
pub fn mad(reference: &EmbeddingSet, generated: &EmbeddingSet, cfg: &MauveConfig) -> Result<DivergenceScore> {
    Ok(mauve(reference, generated, cfg)?.mad_score(cfg, reference.len(), generated.len()))
}
