//! Meta-evaluation: score distortion ladders with a metric and rank-correlate
//! the scores with the ground-truth degradation order.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::mauve::{mauve, MauveConfig};
use crate::mmd::{mmd2_unbiased, MmdConfig};
use crate::moments::fad;
use crate::prdc::{prdc_score, DEFAULT_K};
use crate::rng::keyed_rng;
use crate::score::{DivergenceScore, Metric, Orientation};
use crate::tensor::{load_set, EmbeddingSet, PoolMethod, Role};

/// Largest sample size for which p-values are computed by full enumeration.
pub const EXACT_P_MAX_N: usize = 10;
const SUBSAMPLE_STREAM: u64 = 0x7375_6273;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauB {
    pub tau: f64,
    /// One of the inputs is constant, so τ-b is undefined and reported as 0.
    pub degenerate: bool,
}

/// Pair counts behind τ-b.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PairCounts {
    concordant: i64,
    discordant: i64,
    x_only_ties: i64,
    y_only_ties: i64,
}

fn pair_counts(xs: &[f64], ys: &[f64]) -> PairCounts {
    let mut c = PairCounts {
        concordant: 0,
        discordant: 0,
        x_only_ties: 0,
        y_only_ties: 0,
    };
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            let dx = xs[i].partial_cmp(&xs[j]).expect("finite scores");
            let dy = ys[i].partial_cmp(&ys[j]).expect("finite scores");
            use std::cmp::Ordering::Equal;
            match (dx, dy) {
                (Equal, Equal) => {}
                (Equal, _) => c.x_only_ties += 1,
                (_, Equal) => c.y_only_ties += 1,
                (a, b) if a == b => c.concordant += 1,
                _ => c.discordant += 1,
            }
        }
    }
    c
}

fn check_pair_input(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::Domain(format!(
            "length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientData("Kendall's tau needs at least 2 pairs".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Data("Kendall's tau inputs must be finite".into()));
    }
    Ok(())
}

/// Tie-corrected Kendall rank correlation.
pub fn kendall_tau_b(xs: &[f64], ys: &[f64]) -> Result<TauB> {
    check_pair_input(xs, ys)?;
    let c = pair_counts(xs, ys);
    let untied_y = (c.concordant + c.discordant + c.x_only_ties) as f64;
    let untied_x = (c.concordant + c.discordant + c.y_only_ties) as f64;
    let denom = (untied_x * untied_y).sqrt();
    if denom == 0.0 {
        return Ok(TauB {
            tau: 0.0,
            degenerate: true,
        });
    }
    Ok(TauB {
        tau: (c.concordant - c.discordant) as f64 / denom,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PMethod {
    ExactPermutation,
    NormalApproximation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValue {
    pub p: f64,
    pub method: PMethod,
}

/// Two-sided permutation p-value for τ-b.
///
/// Permuting `ys` leaves the tie structure (hence the τ-b denominator) unchanged,
/// so `|τ| >= |τ_obs|` is decided on the integer statistic `S = C - D`.
/// Above [`EXACT_P_MAX_N`] a tie-corrected normal approximation with a
/// continuity correction of 1 is used instead.
pub fn tau_p_exact(xs: &[f64], ys: &[f64]) -> Result<PValue> {
    check_pair_input(xs, ys)?;
    let n = xs.len();
    let obs = pair_counts(xs, ys);
    let s_obs = (obs.concordant - obs.discordant).abs();
    if kendall_tau_b(xs, ys)?.degenerate {
        return Ok(PValue {
            p: 1.0,
            method: PMethod::ExactPermutation,
        });
    }
    if n > EXACT_P_MAX_N {
        return Ok(PValue {
            p: normal_approx_p(xs, ys, s_obs),
            method: PMethod::NormalApproximation,
        });
    }

    // Heap's algorithm over positions of ys
    let mut perm = ys.to_vec();
    let mut c = vec![0usize; n];
    let mut hits: u64 = 0;
    let mut total: u64 = 0;
    let mut visit = |p: &[f64]| {
        let pc = pair_counts(xs, p);
        total += 1;
        if (pc.concordant - pc.discordant).abs() >= s_obs {
            hits += 1;
        }
    };
    visit(&perm);
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(PValue {
        p: hits as f64 / total as f64,
        method: PMethod::ExactPermutation,
    })
}

fn tie_groups(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .chunk_by(|a, b| a == b)
        .map(|g| g.len() as f64)
        .filter(|&t| t > 1.0)
        .collect()
}

fn normal_approx_p(xs: &[f64], ys: &[f64], s_obs: i64) -> f64 {
    let n = xs.len() as f64;
    let tx = tie_groups(xs);
    let ty = tie_groups(ys);
    let f = |ts: &[f64], g: &dyn Fn(f64) -> f64| ts.iter().map(|&t| g(t)).sum::<f64>();
    let v0 = n * (n - 1.0) * (2.0 * n + 5.0);
    let vt = f(&tx, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let vu = f(&ty, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let v1 = f(&tx, &|t| t * (t - 1.0)) * f(&ty, &|t| t * (t - 1.0)) / (2.0 * n * (n - 1.0));
    let v2 = f(&tx, &|t| t * (t - 1.0) * (t - 2.0)) * f(&ty, &|t| t * (t - 1.0) * (t - 2.0))
        / (9.0 * n * (n - 1.0) * (n - 2.0));
    let var = (v0 - vt - vu) / 18.0 + v1 + v2;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((s_obs as f64 - 1.0).max(0.0)) / var.sqrt();
    let normal = Normal::standard();
    (2.0 * (1.0 - normal.cdf(z))).min(1.0)
}

/// A metric together with the configuration of every metric family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub metric: Metric,
    pub mmd: MmdConfig,
    pub prdc_k: usize,
    pub mauve: MauveConfig,
}

impl MetricSpec {
    pub fn new(metric: Metric, seed: u64) -> Self {
        MetricSpec {
            metric,
            mmd: MmdConfig::default(),
            prdc_k: DEFAULT_K,
            mauve: MauveConfig::with_seed(seed),
        }
    }

    pub fn score(&self, reference: &EmbeddingSet, candidate: &EmbeddingSet) -> Result<DivergenceScore> {
        match self.metric {
            Metric::Fad => fad(reference, candidate),
            Metric::Mmd => mmd2_unbiased(reference, candidate, &self.mmd),
            Metric::Mad => Ok(mauve(reference, candidate, &self.mauve)?.mad_score(
                &self.mauve,
                reference.len(),
                candidate.len(),
            )),
            Metric::Mauve => Ok(mauve(reference, candidate, &self.mauve)?.mauve_score(
                &self.mauve,
                reference.len(),
                candidate.len(),
            )),
            m @ (Metric::Precision | Metric::Recall | Metric::Density | Metric::Coverage) => {
                prdc_score(reference, candidate, self.prdc_k, m)
            }
        }
    }

    /// The subset of the configuration that affects this metric.
    pub fn snapshot(&self) -> serde_json::Value {
        let family = match self.metric {
            Metric::Fad => serde_json::json!({}),
            Metric::Mmd => serde_json::json!({ "mmd": self.mmd }),
            Metric::Mad | Metric::Mauve => serde_json::json!({ "mauve": self.mauve }),
            _ => serde_json::json!({ "prdc_k": self.prdc_k }),
        };
        serde_json::json!({ "metric": self.metric, "params": family })
    }
}

/// K candidate sets ordered from least (level 1) to most distorted.
#[derive(Debug, Clone)]
pub struct DistortionLadder {
    pub reference: EmbeddingSet,
    pub levels: Vec<EmbeddingSet>,
    pub desideratum: String,
}

impl DistortionLadder {
    pub fn new(reference: EmbeddingSet, levels: Vec<EmbeddingSet>, desideratum: impl Into<String>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "a ladder needs at least 2 levels, got {}",
                levels.len()
            )));
        }
        let d = reference.dim();
        if let Some(i) = levels.iter().position(|l| l.dim() != d) {
            return Err(Error::Data(format!(
                "level {} has dimension {}, reference has {d}",
                i + 1,
                levels[i].dim()
            )));
        }
        Ok(DistortionLadder {
            reference,
            levels,
            desideratum: desideratum.into(),
        })
    }

    /// Uses the least distorted level as the reference set.
    pub fn with_oracle_reference(&self) -> Self {
        DistortionLadder {
            reference: self.levels[0].clone().with_role(Role::Reference, "oracle"),
            levels: self.levels.clone(),
            desideratum: self.desideratum.clone(),
        }
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Ground-truth level indices 1..=K.
    pub fn ground_truth(&self) -> Vec<f64> {
        (1..=self.levels.len()).map(|i| i as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRun {
    pub metric: Metric,
    pub orientation: Orientation,
    pub scores: Vec<f64>,
    /// Orientation-corrected: +1 means the metric orders every level correctly.
    pub tau: f64,
    pub p_value: Option<f64>,
    pub p_method: Option<PMethod>,
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    pub set_sizes: Vec<usize>,
}

/// Orientation-corrected τ and p for one score vector against the ladder order.
pub fn run_from_scores(
    metric: Metric,
    orientation: Orientation,
    scores: Vec<f64>,
    config: serde_json::Value,
    set_sizes: Vec<usize>,
) -> Result<MetricRun> {
    let truth: Vec<f64> = (1..=scores.len()).map(|i| i as f64).collect();
    let tb = kendall_tau_b(&scores, &truth)?;
    let p = tau_p_exact(&scores, &truth)?;
    let mut flags = Vec::new();
    if tb.degenerate {
        flags.push("degenerate-tau".into());
    }
    if p.method == PMethod::NormalApproximation {
        flags.push("p-normal-approximation".into());
    }
    Ok(MetricRun {
        metric,
        orientation,
        scores,
        tau: orientation.sign() * tb.tau,
        p_value: Some(p.p),
        p_method: Some(p.method),
        config,
        flags,
        set_sizes,
    })
}

pub fn evaluate_ladder(ladder: &DistortionLadder, spec: &MetricSpec) -> Result<MetricRun> {
    let results: Vec<DivergenceScore> = ladder
        .levels
        .par_iter()
        .enumerate()
        .map(|(i, level)| {
            spec.score(&ladder.reference, level)
                .map_err(|e| e.for_level(i + 1))
        })
        .collect::<Result<_>>()?;
    let scores = results.iter().map(|s| s.value).collect();
    let mut config = spec.snapshot();
    config["desideratum"] = ladder.desideratum.clone().into();
    config["reference_size"] = ladder.reference.len().into();
    let mut run = run_from_scores(
        spec.metric,
        spec.metric.orientation(),
        scores,
        config,
        ladder.levels.iter().map(EmbeddingSet::len).collect(),
    )?;
    for (i, r) in results.iter().enumerate() {
        for f in &r.flags {
            run.flags.push(format!("level {}: {f}", i + 1));
        }
    }
    Ok(run)
}

/// Sorted subsample indices for one (size, level) cell.
pub fn subsample_indices(n: usize, size: usize, seed: u64, level: usize) -> Vec<usize> {
    let mut rng = keyed_rng(seed, &[SUBSAMPLE_STREAM, size as u64, level as u64]);
    let mut idx = index::sample(&mut rng, n, size).into_vec();
    idx.sort_unstable();
    idx
}

/// Re-runs the ladder with every level set subsampled to each size; the reference is untouched.
pub fn subsample_run(
    ladder: &DistortionLadder,
    spec: &MetricSpec,
    sizes: &[usize],
    seed: u64,
) -> Result<Vec<MetricRun>> {
    let min_n = ladder.levels.iter().map(EmbeddingSet::len).min().expect("K >= 2");
    sizes
        .iter()
        .map(|&size| {
            if size < 2 || size > min_n {
                return Err(Error::Domain(format!(
                    "subsample size {size} outside 2..={min_n}"
                )));
            }
            let levels = ladder
                .levels
                .iter()
                .enumerate()
                .map(|(li, set)| {
                    set.select(&subsample_indices(set.len(), size, seed, li), set.label())
                })
                .collect::<Result<Vec<_>>>()?;
            let sub = DistortionLadder {
                reference: ladder.reference.clone(),
                levels,
                desideratum: ladder.desideratum.clone(),
            };
            let mut run = evaluate_ladder(&sub, spec)?;
            run.config["subsample"] = serde_json::json!({ "size": size, "seed": seed });
            Ok(run)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedScores {
    pub values: Vec<f64>,
    /// All scores equal; values are set to 0.5.
    pub degenerate: bool,
}

/// Per-run min-max scaling to [0, 1].
pub fn normalize_scores(runs: &[MetricRun]) -> Vec<NormalizedScores> {
    runs.iter().map(|r| normalize(&r.scores)).collect()
}

pub fn normalize(scores: &[f64]) -> NormalizedScores {
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return NormalizedScores {
            values: vec![0.5; scores.len()],
            degenerate: true,
        };
    }
    NormalizedScores {
        values: scores.iter().map(|s| (s - lo) / (hi - lo)).collect(),
        degenerate: false,
    }
}

/// On-disk ladder description; paths are relative to the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderFile {
    pub desideratum: String,
    pub reference: PathBuf,
    pub levels: Vec<LadderLevelFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderLevelFile {
    pub index: usize,
    pub path: PathBuf,
}

impl LadderFile {
    pub fn read(path: &Path) -> Result<LadderFile> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut file: LadderFile = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if file.reference.is_relative() {
            file.reference = base.join(&file.reference);
        }
        for l in &mut file.levels {
            if l.path.is_relative() {
                l.path = base.join(&l.path);
            }
        }
        file.levels.sort_by_key(|l| l.index);
        if file.levels.iter().enumerate().any(|(i, l)| l.index != i + 1) {
            return Err(Error::Data("ladder level indices must be contiguous from 1".into()));
        }
        Ok(file)
    }

    pub fn load(&self, method: PoolMethod) -> Result<DistortionLadder> {
        let reference = load_set(&self.reference, method, Role::Reference, "reference")?;
        let levels = self
            .levels
            .par_iter()
            .map(|l| {
                load_set(&l.path, method, Role::Candidate, &format!("level {}", l.index))
                    .map_err(|e| e.for_level(l.index))
            })
            .collect::<Result<Vec<_>>>()?;
        DistortionLadder::new(reference, levels, self.desideratum.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::{prop, prop_assert, prop_assert_eq, proptest, Strategy};

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn perfect_and_reversed() {
        assert_eq!(kendall_tau_b(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap().tau, 1.0);
        assert_eq!(kendall_tau_b(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap().tau, -1.0);
    }

    #[test]
    fn ties_use_tau_b_denominator() {
        // C=2, D=0, x-only ties=1, y-only ties=0 -> 2 / sqrt(3 * 2)
        let t = kendall_tau_b(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(approx(t.tau, 2.0 / 6f64.sqrt(), 1e-15));
    }

    #[test]
    fn constant_input_is_degenerate() {
        let t = kendall_tau_b(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(t, TauB { tau: 0.0, degenerate: true });
        assert_eq!(tau_p_exact(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap().p, 1.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(kendall_tau_b(&[1.0, 2.0], &[1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn concordant_three_enumerates_to_one_third() {
        let p = tau_p_exact(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(p.method, PMethod::ExactPermutation);
        assert!(approx(p.p, 2.0 / 6.0, 1e-15));
    }

    #[test]
    fn large_n_falls_back_to_normal() {
        let xs: Vec<f64> = (0..12).map(f64::from).collect();
        let p = tau_p_exact(&xs, &xs).unwrap();
        assert_eq!(p.method, PMethod::NormalApproximation);
        assert!(p.p < 1e-3);
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize(&[2.0, 4.0, 6.0]).values, vec![0.0, 0.5, 1.0]);
        let c = normalize(&[3.0, 3.0]);
        assert!(c.degenerate);
        assert_eq!(c.values, vec![0.5, 0.5]);
    }

    #[test]
    fn orientation_flip_for_higher_better() {
        let down = run_from_scores(
            Metric::Recall,
            Orientation::HigherBetter,
            vec![0.9, 0.7, 0.5, 0.2],
            serde_json::json!({}),
            vec![],
        )
        .unwrap();
        assert_eq!(down.tau, 1.0);
        let up = run_from_scores(
            Metric::Fad,
            Orientation::LowerBetter,
            vec![0.1, 0.3, 0.5, 0.9],
            serde_json::json!({}),
            vec![],
        )
        .unwrap();
        assert_eq!(up.tau, 1.0);
    }

    #[test]
    fn subsample_indices_are_seeded() {
        assert_eq!(subsample_indices(100, 10, 3, 2), subsample_indices(100, 10, 3, 2));
        assert_ne!(subsample_indices(100, 10, 3, 2), subsample_indices(100, 10, 4, 2));
        assert_eq!(subsample_indices(7, 7, 1, 0), (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn ladder_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = |v: f64| Array2::from_shape_fn((4, 2), |(i, j)| v + i as f64 + 0.5 * j as f64);
        crate::tensor::npy::write(&m(0.0), &dir.path().join("ref.npy")).unwrap();
        for i in 1..=3 {
            crate::tensor::npy::write(&m(i as f64), &dir.path().join(format!("l{i}.npy"))).unwrap();
        }
        let json = r#"{"desideratum": "fidelity", "reference": "ref.npy",
            "levels": [{"index": 2, "path": "l2.npy"}, {"index": 1, "path": "l1.npy"}, {"index": 3, "path": "l3.npy"}]}"#;
        let p = dir.path().join("ladder.json");
        fs::write(&p, json).unwrap();
        let ladder = LadderFile::read(&p).unwrap().load(PoolMethod::Mean).unwrap();
        assert_eq!(ladder.num_levels(), 3);
        let run = evaluate_ladder(&ladder, &MetricSpec::new(Metric::Fad, 0)).unwrap();
        assert_eq!(run.tau, 1.0);
    }

    fn scores() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-50i32..50, 2..8).prop_map(|v| v.into_iter().map(f64::from).collect())
    }

    proptest! {
        #[test]
        fn monotone_maps_preserve_tau(xs in scores()) {
            let truth: Vec<f64> = (1..=xs.len()).map(|i| i as f64).collect();
            let base = kendall_tau_b(&xs, &truth).unwrap().tau;
            let exp: Vec<f64> = xs.iter().map(|v| (v / 10.0).exp()).collect();
            let affine: Vec<f64> = xs.iter().map(|v| 3.0 * v - 7.0).collect();
            prop_assert_eq!(kendall_tau_b(&exp, &truth).unwrap().tau, base);
            prop_assert_eq!(kendall_tau_b(&affine, &truth).unwrap().tau, base);
            let norm = normalize(&xs);
            if !norm.degenerate {
                prop_assert_eq!(kendall_tau_b(&norm.values, &truth).unwrap().tau, base);
            }
        }

        #[test]
        fn negation_with_flipped_orientation_is_neutral(xs in scores()) {
            let neg: Vec<f64> = xs.iter().map(|v| -v).collect();
            let a = run_from_scores(Metric::Fad, Orientation::LowerBetter, xs, serde_json::json!({}), vec![]).unwrap();
            let b = run_from_scores(Metric::Fad, Orientation::HigherBetter, neg, serde_json::json!({}), vec![]).unwrap();
            prop_assert!(approx(a.tau, b.tau, 1e-15));
        }

        #[test]
        fn exact_p_is_symmetric(xs in scores(), seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            let mut ys = xs.clone();
            ys.shuffle(&mut keyed_rng(seed, &[]));
            prop_assert_eq!(tau_p_exact(&xs, &ys).unwrap().p, tau_p_exact(&ys, &xs).unwrap().p);
            let t = kendall_tau_b(&xs, &ys).unwrap().tau;
            prop_assert!(t.abs() <= 1.0 + 1e-15);
        }
    }
}
