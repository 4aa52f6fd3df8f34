//! Gaussian sufficient statistics and the Fréchet distance between them (FAD).

use nalgebra::{DMatrix, DVector};
use serde_json::json;

use crate::error::{Error, Result};
use crate::score::{DivergenceScore, Metric};
use crate::tensor::EmbeddingSet;

/// Residues of magnitude above this are flagged on the score.
pub const RESIDUE_FLAG_THRESHOLD: f64 = 1e-6;

const SYMMETRY_TOL: f64 = 1e-8;
const EIGEN_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub n: usize,
}

impl GaussianStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Column means and the unbiased (N-1) sample covariance, symmetrized.
pub fn fit_gaussian(set: &EmbeddingSet) -> Result<GaussianStats> {
    let (n, d) = set.data().dim();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 samples for a covariance, got {n}"
        )));
    }
    let x = DMatrix::from_row_slice(n, d, set.data().as_slice().expect("standard layout"));
    let mean: DVector<f64> = x.row_mean().transpose();
    let mut centered = x;
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let c = centered.tr_mul(&centered) / (n as f64 - 1.0);
    let cov = (&c + c.transpose()) * 0.5;
    Ok(GaussianStats { mean, cov, n })
}

/// Principal square root of a symmetric positive semidefinite matrix.
///
/// Eigenvalues are clamped at zero before taking roots, so rounding-level negative
/// eigenvalues do not produce NaNs.
pub fn matrix_sqrt_psd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::Domain(format!(
            "matrix square root needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = a.amax().max(1.0);
    let asym = (a - a.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::Domain(format!(
            "matrix is not symmetric (max |a_ij - a_ji| = {asym:e})"
        )));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;
    let top = eig.eigenvalues.max().max(0.0);
    let low = eig.eigenvalues.min();
    if low < -EIGEN_FLOOR * top.max(1.0) {
        return Err(Error::Domain(format!(
            "matrix is not positive semidefinite (eigenvalue {low:e})"
        )));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    let s = v * DMatrix::from_diagonal(&roots) * v.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

/// Raw Fréchet distance before clamping, plus the clamped value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrechetParts {
    pub mean_term: f64,
    pub trace_term: f64,
    pub raw: f64,
    pub value: f64,
}

pub fn frechet_parts(g1: &GaussianStats, g2: &GaussianStats) -> Result<FrechetParts> {
    if g1.dim() != g2.dim() {
        return Err(Error::Domain(format!(
            "dimension mismatch: {} vs {}",
            g1.dim(),
            g2.dim()
        )));
    }
    let mean_term = (&g1.mean - &g2.mean).norm_squared();
    let s1 = matrix_sqrt_psd(&g1.cov)?;
    let inner = &s1 * &g2.cov * &s1;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross = matrix_sqrt_psd(&inner)?.trace();
    let trace_term = g1.cov.trace() + g2.cov.trace() - 2.0 * cross;
    let raw = mean_term + trace_term;
    Ok(FrechetParts {
        mean_term,
        trace_term,
        raw,
        value: raw.max(0.0),
    })
}

pub fn frechet_distance(g1: &GaussianStats, g2: &GaussianStats) -> Result<DivergenceScore> {
    let parts = frechet_parts(g1, g2)?;
    let flagged = parts.raw < -RESIDUE_FLAG_THRESHOLD;
    let mut config = json!({ "covariance": "unbiased", "sqrtm": "symmetric-eigen" });
    if flagged {
        config["negative_residue"] = json!(parts.raw);
    }
    let mut score = DivergenceScore::new(Metric::Fad, parts.value, config, g1.n, g2.n);
    if flagged {
        score.flags.push("negative-trace-residue-clamped".into());
    }
    Ok(score)
}

/// FAD between a reference and a candidate set.
pub fn fad(reference: &EmbeddingSet, candidate: &EmbeddingSet) -> Result<DivergenceScore> {
    if reference.dim() != candidate.dim() {
        return Err(Error::Domain(format!(
            "dimension mismatch: {} vs {}",
            reference.dim(),
            candidate.dim()
        )));
    }
    frechet_distance(&fit_gaussian(reference)?, &fit_gaussian(candidate)?)
}
