//! Precision, recall, density and coverage from k-nearest-neighbour balls.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::score::{DivergenceScore, Metric};
use crate::tensor::{sq_dist, EmbeddingSet};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrdcResult {
    pub precision: f64,
    pub recall: f64,
    pub density: f64,
    pub coverage: f64,
    pub k: usize,
}

impl PrdcResult {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Precision => Some(self.precision),
            Metric::Recall => Some(self.recall),
            Metric::Density => Some(self.density),
            Metric::Coverage => Some(self.coverage),
            _ => None,
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Distance from each point to its k-th nearest neighbour in the same set, self excluded.
pub fn knn_radii(set: &EmbeddingSet, k: usize) -> Result<Vec<f64>> {
    let n = set.len();
    if k == 0 || k >= n {
        return Err(Error::Domain(format!("k must lie in 1..={}, got {k}", n - 1)));
    }
    Ok((0..n)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n - 1),
            |buf, i| {
                buf.clear();
                let xi = set.row(i);
                buf.extend((0..n).filter(|&j| j != i).map(|j| dist(xi, set.row(j))));
                *buf.select_nth_unstable_by(k - 1, f64::total_cmp).1
            },
        )
        .collect())
}

pub fn prdc(reference: &EmbeddingSet, generated: &EmbeddingSet, k: usize) -> Result<PrdcResult> {
    if reference.dim() != generated.dim() {
        return Err(Error::Domain(format!(
            "dimension mismatch: {} vs {}",
            reference.dim(),
            generated.dim()
        )));
    }
    let limit = reference.len().min(generated.len()) - 1;
    if k == 0 || k > limit {
        return Err(Error::Domain(format!("k must lie in 1..={limit}, got {k}")));
    }
    let ref_radii = knn_radii(reference, k)?;
    let gen_radii = knn_radii(generated, k)?;

    // per generated point: how many reference balls contain it
    let inside_counts: Vec<usize> = (0..generated.len())
        .into_par_iter()
        .map(|j| {
            let yj = generated.row(j);
            (0..reference.len())
                .filter(|&i| dist(yj, reference.row(i)) <= ref_radii[i])
                .count()
        })
        .collect();

    // per reference point: (inside some generated ball, own ball holds some generated point)
    let ref_flags: Vec<(bool, bool)> = (0..reference.len())
        .into_par_iter()
        .map(|i| {
            let xi = reference.row(i);
            let mut recalled = false;
            let mut covered = false;
            for (j, &sj) in gen_radii.iter().enumerate() {
                let d = dist(xi, generated.row(j));
                recalled |= d <= sj;
                covered |= d <= ref_radii[i];
                if recalled && covered {
                    break;
                }
            }
            (recalled, covered)
        })
        .collect();

    let n_ref = reference.len() as f64;
    let n_gen = generated.len() as f64;
    let precision = inside_counts.iter().filter(|&&c| c > 0).count() as f64 / n_gen;
    let density = inside_counts.iter().sum::<usize>() as f64 / (k as f64 * n_gen);
    let recall = ref_flags.iter().filter(|f| f.0).count() as f64 / n_ref;
    let coverage = ref_flags.iter().filter(|f| f.1).count() as f64 / n_ref;
    Ok(PrdcResult {
        precision,
        recall,
        density,
        coverage,
        k,
    })
}

/// One PRDC component wrapped as a score.
pub fn prdc_score(
    reference: &EmbeddingSet,
    generated: &EmbeddingSet,
    k: usize,
    metric: Metric,
) -> Result<DivergenceScore> {
    let r = prdc(reference, generated, k)?;
    let value = r
        .get(metric)
        .ok_or_else(|| Error::Domain(format!("{metric} is not a PRDC component")))?;
    Ok(DivergenceScore::new(
        metric,
        value,
        json!({ "k": k, "boundary": "inclusive" }),
        reference.len(),
        generated.len(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Role;
    use ndarray::{array, Array2};

    fn set(data: Array2<f64>) -> EmbeddingSet {
        EmbeddingSet::new(data, Role::Reference, "t").unwrap()
    }

    #[test]
    fn radii_on_a_line() {
        assert_eq!(knn_radii(&set(array![[0.0], [1.0], [3.0]]), 1).unwrap(), vec![1.0, 1.0, 2.0]);
    }

    #[test]
    fn duplicates_have_zero_radius() {
        let r = knn_radii(&set(array![[0.0], [0.0], [5.0], [5.0]]), 1).unwrap();
        assert_eq!(r, vec![0.0; 4]);
    }

    #[test]
    fn grid_interior_radius_is_spacing() {
        let pts: Vec<f64> = (0..10)
            .flat_map(|i| (0..10).flat_map(move |j| [i as f64 * 0.5, j as f64 * 0.5]))
            .collect();
        let s = set(Array2::from_shape_vec((100, 2), pts).unwrap());
        let r = knn_radii(&s, 4).unwrap();
        for i in 1..9 {
            for j in 1..9 {
                assert_eq!(r[i * 10 + j], 0.5);
            }
        }
    }

    #[test]
    fn k_out_of_range() {
        let s = set(array![[0.0], [1.0], [2.0]]);
        assert!(matches!(knn_radii(&s, 3), Err(Error::Domain(_))));
        assert!(matches!(knn_radii(&s, 0), Err(Error::Domain(_))));
        assert!(matches!(prdc(&s, &s, 3), Err(Error::Domain(_))));
    }

    #[test]
    fn identical_sets() {
        let s = set(array![[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 3.0]]);
        let r = prdc(&s, &s, 2).unwrap();
        assert_eq!((r.precision, r.recall, r.coverage), (1.0, 1.0, 1.0));
    }

    #[test]
    fn disjoint_support() {
        let a = set(array![[0.0], [0.1], [0.2], [0.3]]);
        let b = set(array![[100.0], [100.1], [100.2], [100.3]]);
        let r = prdc(&a, &b, 2).unwrap();
        assert_eq!((r.precision, r.density, r.coverage, r.recall), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn swap_exchanges_precision_and_recall() {
        let a = set(array![[0.0], [0.4], [1.0], [1.1], [3.0]]);
        let b = set(array![[0.2], [0.9], [2.5], [2.6], [7.0], [7.5]]);
        let ab = prdc(&a, &b, 2).unwrap();
        let ba = prdc(&b, &a, 2).unwrap();
        assert_eq!(ab.precision, ba.recall);
        assert_eq!(ab.recall, ba.precision);
    }
}
