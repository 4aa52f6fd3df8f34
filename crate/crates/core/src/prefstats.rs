//! Pairwise human-preference analysis: win matrices, Bradley-Terry scores,
//! position-bias and pairwise sign tests, annotator agreement, and rank
//! correlation of a metric against the human ranking.
//!
//! Ties are dropped from every statistic and only reported as counts.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::metaeval::{kendall_tau_b, tau_p_exact, PMethod};
use crate::score::Orientation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Fidelity,
    Musicality,
}

impl Axis {
    pub const ALL: [Axis; 2] = [Axis::Fidelity, Axis::Musicality];

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Fidelity => "fidelity",
            Axis::Musicality => "musicality",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fidelity" => Ok(Axis::Fidelity),
            "musicality" => Ok(Axis::Musicality),
            other => Err(Error::Domain(format!("unknown axis `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    A,
    B,
    #[serde(rename = "tie")]
    Tie,
}

fn flexible_bool<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    let s = String::deserialize(d)?;
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(serde::de::Error::custom(format!("expected a boolean, got `{other}`"))),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub pair_id: String,
    pub system_a: String,
    pub system_b: String,
    pub axis: Axis,
    pub outcome: Outcome,
    pub annotator: String,
    #[serde(deserialize_with = "flexible_bool")]
    pub position_a_first: bool,
}

impl PreferenceRecord {
    pub fn winner(&self) -> Option<&str> {
        match self.outcome {
            Outcome::A => Some(&self.system_a),
            Outcome::B => Some(&self.system_b),
            Outcome::Tie => None,
        }
    }

    /// Whether the clip played second was preferred (`None` for ties).
    pub fn second_won(&self) -> Option<bool> {
        match self.outcome {
            Outcome::Tie => None,
            Outcome::A => Some(!self.position_a_first),
            Outcome::B => Some(self.position_a_first),
        }
    }
}

/// Reads the preference CSV (header required).
pub fn read_preferences(path: &Path) -> Result<Vec<PreferenceRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut records = Vec::new();
    for (i, row) in reader.deserialize::<PreferenceRecord>().enumerate() {
        let rec = row.map_err(|e| Error::Format(format!("{} row {}: {e}", path.display(), i + 2)))?;
        if rec.system_a == rec.system_b {
            return Err(Error::Data(format!(
                "{} row {}: system `{}` is compared with itself",
                path.display(),
                i + 2,
                rec.system_a
            )));
        }
        records.push(rec);
    }
    Ok(records)
}

pub fn write_preferences(records: &[PreferenceRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
    for r in records {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Systems named in the records, sorted.
pub fn systems_in(records: &[PreferenceRecord]) -> Vec<String> {
    let mut s: Vec<String> = records
        .iter()
        .flat_map(|r| [r.system_a.clone(), r.system_b.clone()])
        .collect();
    s.sort();
    s.dedup();
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinMatrix {
    pub systems: Vec<String>,
    /// `wins[i][j]`: times system i beat system j.
    pub wins: Vec<Vec<u64>>,
    /// Symmetric tie counts, kept for reporting only.
    pub ties: Vec<Vec<u64>>,
}

impl WinMatrix {
    pub fn new(systems: Vec<String>) -> Self {
        let s = systems.len();
        WinMatrix {
            systems,
            wins: vec![vec![0; s]; s],
            ties: vec![vec![0; s]; s],
        }
    }

    pub fn len(&self) -> usize {
        self.systems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.systems.is_empty()
    }

    pub fn total_wins(&self) -> u64 {
        self.wins.iter().flatten().sum()
    }

    pub fn comparisons(&self, i: usize, j: usize) -> u64 {
        self.wins[i][j] + self.wins[j][i]
    }

    /// Win rate of i over j among decided comparisons.
    pub fn win_rate(&self, i: usize, j: usize) -> Option<f64> {
        let n = self.comparisons(i, j);
        (n > 0).then(|| self.wins[i][j] as f64 / n as f64)
    }

    pub fn scaled(&self, factor: u64) -> WinMatrix {
        let scale = |m: &Vec<Vec<u64>>| m.iter().map(|r| r.iter().map(|v| v * factor).collect()).collect();
        WinMatrix {
            systems: self.systems.clone(),
            wins: scale(&self.wins),
            ties: scale(&self.ties),
        }
    }
}

/// Counts the decided records on the selected axes.
pub fn pool_preferences(records: &[PreferenceRecord], systems: &[String], axes: &[Axis]) -> Result<WinMatrix> {
    let index: HashMap<&str, usize> = systems.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let lookup = |name: &str| {
        index
            .get(name)
            .copied()
            .ok_or_else(|| Error::Data(format!("unknown system `{name}`")))
    };
    let mut m = WinMatrix::new(systems.to_vec());
    for r in records.iter().filter(|r| axes.contains(&r.axis)) {
        let (a, b) = (lookup(&r.system_a)?, lookup(&r.system_b)?);
        if a == b {
            return Err(Error::Data(format!("pair `{}` compares `{}` with itself", r.pair_id, r.system_a)));
        }
        match r.outcome {
            Outcome::A => m.wins[a][b] += 1,
            Outcome::B => m.wins[b][a] += 1,
            Outcome::Tie => {
                m.ties[a][b] += 1;
                m.ties[b][a] += 1;
            }
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtScores {
    pub systems: Vec<String>,
    /// Positive, summing to 100.
    pub scores: Vec<f64>,
    pub iterations: usize,
}

impl BtScores {
    pub fn get(&self, system: &str) -> Option<f64> {
        self.systems.iter().position(|s| s == system).map(|i| self.scores[i])
    }
}

pub const BT_TOL: f64 = 1e-10;
pub const BT_MAX_ITERS: usize = 100_000;

fn reachable(adj: &[Vec<bool>], reverse: bool) -> Vec<bool> {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            let edge = if reverse { adj[j][i] } else { adj[i][j] };
            if edge && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen
}

/// Bradley-Terry maximum likelihood by minorization-maximization.
///
/// The "beats" graph must be strongly connected, otherwise the likelihood has
/// no finite maximizer and the fit fails rather than regularizing.
pub fn bt_fit(m: &WinMatrix, tol: f64, max_iters: usize) -> Result<BtScores> {
    let s = m.len();
    if s < 2 {
        return Err(Error::InsufficientData("Bradley-Terry needs at least two systems".into()));
    }
    let wins: Vec<f64> = (0..s).map(|i| m.wins[i].iter().sum::<u64>() as f64).collect();
    if let Some(i) = wins.iter().position(|&w| w == 0.0) {
        return Err(Error::DegenerateData(format!("system `{}` has no wins", m.systems[i])));
    }
    let adj: Vec<Vec<bool>> = (0..s).map(|i| (0..s).map(|j| m.wins[i][j] > 0).collect()).collect();
    let forward = reachable(&adj, false);
    let backward = reachable(&adj, true);
    if let Some(j) = (0..s).find(|&j| !forward[j] || !backward[j]) {
        let dir = if !forward[j] { "beaten by" } else { "beats" };
        return Err(Error::DegenerateData(format!(
            "comparison graph is not strongly connected: no chain of wins shows `{}` {dir} `{}`",
            m.systems[0], m.systems[j]
        )));
    }

    let mut w = vec![1.0 / s as f64; s];
    for iter in 1..=max_iters {
        let mut next: Vec<f64> = (0..s)
            .map(|i| {
                let denom: f64 = (0..s)
                    .filter(|&j| j != i)
                    .map(|j| m.comparisons(i, j) as f64 / (w[i] + w[j]))
                    .sum();
                wins[i] / denom
            })
            .collect();
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        let change = next
            .iter()
            .zip(&w)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        w = next;
        if change < tol {
            return Ok(BtScores {
                systems: m.systems.clone(),
                scores: w.iter().map(|v| 100.0 * v).collect(),
                iterations: iter,
            });
        }
    }
    Err(Error::Numerical(format!(
        "Bradley-Terry did not converge to {tol:e} in {max_iters} iterations"
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankCorrelation {
    pub tau: f64,
    pub p_value: f64,
    pub p_method: PMethod,
    pub degenerate: bool,
}

/// Orientation-corrected τ-b between metric values and human scores, so a
/// metric that ranks systems exactly as humans do gets +1.
pub fn rank_correlation(
    systems: &[String],
    metric: &[f64],
    orientation: Orientation,
    bt: &BtScores,
) -> Result<RankCorrelation> {
    if systems.len() != metric.len() {
        return Err(Error::Domain(format!(
            "{} systems but {} metric values",
            systems.len(),
            metric.len()
        )));
    }
    let mut sorted_a = systems.to_vec();
    let mut sorted_b = bt.systems.clone();
    sorted_a.sort();
    sorted_b.sort();
    if sorted_a != sorted_b {
        return Err(Error::Domain("metric and Bradley-Terry scores cover different systems".into()));
    }
    // Human "badness" rank runs opposite to BT strength.
    let human: Vec<f64> = systems.iter().map(|s| -bt.get(s).expect("checked")).collect();
    let t = kendall_tau_b(metric, &human)?;
    let p = tau_p_exact(metric, &human)?;
    Ok(RankCorrelation {
        tau: orientation.sign() * t.tau,
        p_value: p.p,
        p_method: p.method,
        degenerate: t.degenerate,
    })
}

/// Two-sided exact binomial test of `k` successes in `n` trials against 1/2.
pub fn binomial_two_sided_half(k: u64, n: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let tail = k.min(n - k);
    let ln_half_n = n as f64 * std::f64::consts::LN_2;
    let lower: f64 = (0..=tail).map(|i| (ln_binomial(n, i) - ln_half_n).exp()).sum();
    (2.0 * lower).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasTest {
    /// `None` for the pooled test over both axes.
    pub axis: Option<Axis>,
    pub non_ties: u64,
    pub second_wins: u64,
    pub proportion_second: f64,
    pub p_value: f64,
}

fn bias_over<'a>(records: impl Iterator<Item = &'a PreferenceRecord>, axis: Option<Axis>) -> Result<BiasTest> {
    let (mut n, mut k) = (0u64, 0u64);
    for second in records.filter_map(PreferenceRecord::second_won) {
        n += 1;
        k += second as u64;
    }
    if n == 0 {
        let which = axis.map_or("any axis".to_string(), |a| a.to_string());
        return Err(Error::DegenerateData(format!("no decided preferences on {which}")));
    }
    Ok(BiasTest {
        axis,
        non_ties: n,
        second_wins: k,
        proportion_second: k as f64 / n as f64,
        p_value: binomial_two_sided_half(k, n),
    })
}

/// Tests whether the second-presented clip wins more or less than half the
/// time, per axis present in the data and pooled.
pub fn position_bias_test(records: &[PreferenceRecord]) -> Result<Vec<BiasTest>> {
    let mut out = Vec::new();
    for axis in Axis::ALL {
        if records.iter().any(|r| r.axis == axis && r.outcome != Outcome::Tie) {
            out.push(bias_over(records.iter().filter(|r| r.axis == axis), Some(axis))?);
        }
    }
    out.push(bias_over(records.iter(), None)?);
    Ok(out)
}

/// Two-sided exact sign test for every ordered pair; `None` where a pair was
/// never decided. On ±1 paired differences the Wilcoxon signed-rank test
/// reduces to exactly this test.
pub fn pairwise_significance(m: &WinMatrix) -> Vec<Vec<Option<f64>>> {
    let s = m.len();
    (0..s)
        .map(|i| {
            (0..s)
                .map(|j| {
                    let n = m.comparisons(i, j);
                    (i != j && n > 0).then(|| binomial_two_sided_half(m.wins[i][j], n))
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    /// Fraction of eligible pairs with a true majority; `None` when nothing is eligible.
    pub fraction: Option<f64>,
    pub agreeing: usize,
    pub eligible: usize,
}

/// Inter-annotator agreement over items keyed by `(pair_id, axis)`.
///
/// Votes are compared by the winning system, so annotators who saw the two
/// systems in different A/B slots still agree when they picked the same one.
pub fn agreement(records: &[PreferenceRecord]) -> Agreement {
    let mut items: BTreeMap<(&str, Axis), Vec<&str>> = BTreeMap::new();
    for r in records {
        if let Some(w) = r.winner() {
            items.entry((&r.pair_id, r.axis)).or_default().push(w);
        }
    }
    let (mut agreeing, mut eligible) = (0, 0);
    for votes in items.values().filter(|v| v.len() >= 2) {
        eligible += 1;
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for v in votes {
            *counts.entry(v).or_default() += 1;
        }
        if counts.values().any(|&c| c >= 2) {
            agreeing += 1;
        }
    }
    Agreement {
        fraction: (eligible > 0).then(|| agreeing as f64 / eligible as f64),
        agreeing,
        eligible,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn rec(pair: &str, a: &str, b: &str, axis: Axis, outcome: Outcome, ann: &str, a_first: bool) -> PreferenceRecord {
        PreferenceRecord {
            pair_id: pair.into(),
            system_a: a.into(),
            system_b: b.into(),
            axis,
            outcome,
            annotator: ann.into(),
            position_a_first: a_first,
        }
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    #[test]
    fn pooling_counts_and_drops_ties() {
        let sys = names(2);
        let one = [rec("p", "s0", "s1", Axis::Fidelity, Outcome::A, "x", true)];
        let m = pool_preferences(&one, &sys, &[Axis::Fidelity]).unwrap();
        assert_eq!(m.wins, vec![vec![0, 1], vec![0, 0]]);
        let ties = [rec("p", "s0", "s1", Axis::Musicality, Outcome::Tie, "x", true)];
        let m = pool_preferences(&ties, &sys, &Axis::ALL).unwrap();
        assert_eq!(m.total_wins(), 0);
        assert_eq!(m.ties[0][1], 1);
        let unknown = [rec("p", "s0", "zz", Axis::Fidelity, Outcome::A, "x", true)];
        assert!(matches!(pool_preferences(&unknown, &sys, &Axis::ALL), Err(Error::Data(_))));
    }

    #[test]
    fn pooling_is_additive_over_axes() {
        let sys = names(3);
        let mut rng = crate::rng::keyed_rng(1, &[]);
        let recs: Vec<_> = (0..300)
            .map(|i| {
                let a = rng.random_range(0..3);
                let b = (a + rng.random_range(1..3)) % 3;
                let axis = if rng.random::<bool>() { Axis::Fidelity } else { Axis::Musicality };
                let outcome = [Outcome::A, Outcome::B, Outcome::Tie][rng.random_range(0..3)];
                rec(&i.to_string(), &sys[a], &sys[b], axis, outcome, "x", true)
            })
            .collect();
        let f = pool_preferences(&recs, &sys, &[Axis::Fidelity]).unwrap();
        let m = pool_preferences(&recs, &sys, &[Axis::Musicality]).unwrap();
        let both = pool_preferences(&recs, &sys, &Axis::ALL).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(both.wins[i][j], f.wins[i][j] + m.wins[i][j]);
            }
        }
        let decided = recs.iter().filter(|r| r.outcome != Outcome::Tie).count() as u64;
        assert_eq!(both.total_wins(), decided);
    }

    #[test]
    fn bt_closed_forms() {
        let mut m = WinMatrix::new(names(2));
        m.wins = vec![vec![0, 3], vec![1, 0]];
        let bt = bt_fit(&m, BT_TOL, BT_MAX_ITERS).unwrap();
        assert!((bt.scores[0] - 75.0).abs() < 1e-7 && (bt.scores[1] - 25.0).abs() < 1e-7);

        let mut m = WinMatrix::new(names(4));
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    m.wins[i][j] = 5;
                }
            }
        }
        let bt = bt_fit(&m, BT_TOL, BT_MAX_ITERS).unwrap();
        assert!(bt.scores.iter().all(|s| (s - 25.0).abs() < 1e-9));
    }

    #[test]
    fn bt_rejects_degenerate_graphs() {
        let mut m = WinMatrix::new(names(3));
        m.wins[0][1] = 2;
        m.wins[1][0] = 1;
        m.wins[0][2] = 1;
        assert!(matches!(bt_fit(&m, BT_TOL, BT_MAX_ITERS), Err(Error::DegenerateData(msg)) if msg.contains("s2")));
        m.wins[2][1] = 1;
        // s2 wins once but never beats anyone who reaches s0 ... it beats s1 who beats s0
        assert!(bt_fit(&m, BT_TOL, BT_MAX_ITERS).is_ok());
        let mut m = WinMatrix::new(names(4));
        m.wins[0][1] = 1;
        m.wins[1][0] = 1;
        m.wins[2][3] = 1;
        m.wins[3][2] = 1;
        assert!(matches!(bt_fit(&m, BT_TOL, BT_MAX_ITERS), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn bt_scaling_and_relabeling() {
        let mut m = WinMatrix::new(names(3));
        m.wins = vec![vec![0, 7, 4], vec![3, 0, 6], vec![2, 5, 0]];
        let bt = bt_fit(&m, BT_TOL, BT_MAX_ITERS).unwrap();
        let scaled = bt_fit(&m.scaled(10), BT_TOL, BT_MAX_ITERS).unwrap();
        for (a, b) in bt.scores.iter().zip(&scaled.scores) {
            assert!((a - b).abs() < 1e-6);
        }
        let perm = [2, 0, 1];
        let mut p = WinMatrix::new(perm.iter().map(|&i| m.systems[i].clone()).collect());
        for i in 0..3 {
            for j in 0..3 {
                p.wins[i][j] = m.wins[perm[i]][perm[j]];
            }
        }
        let bp = bt_fit(&p, BT_TOL, BT_MAX_ITERS).unwrap();
        for (i, &src) in perm.iter().enumerate() {
            assert!((bp.scores[i] - bt.scores[src]).abs() < 1e-6);
        }
        assert!((bt.scores.iter().sum::<f64>() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn binomial_tests() {
        assert_eq!(binomial_two_sided_half(10, 20), 1.0);
        assert!((binomial_two_sided_half(0, 20) - 2.0 * 0.5f64.powi(20)).abs() < 1e-15);
        // 2·P(Bin(20, .5) ≤ 5) = 2·21700/2^20
        assert!((binomial_two_sided_half(15, 20) - 2.0 * 21700.0 / 1048576.0).abs() < 1e-12);
        let p = binomial_two_sided_half(1048, 2000);
        assert!((0.02..=0.05).contains(&p), "{p}");
    }

    #[test]
    fn sign_test_matrix() {
        let mut m = WinMatrix::new(names(3));
        m.wins[0][1] = 10;
        m.wins[1][0] = 10;
        m.wins[0][2] = 15;
        m.wins[2][0] = 5;
        let p = pairwise_significance(&m);
        assert_eq!(p[0][1], Some(1.0));
        assert!((p[0][2].unwrap() - 0.041).abs() < 5e-4);
        assert_eq!(p[0][2], p[2][0]);
        assert_eq!(p[1][2], None);
        assert_eq!(p[0][0], None);
    }

    #[test]
    fn position_bias_per_axis() {
        let mut recs = Vec::new();
        for i in 0..20 {
            recs.push(rec(&i.to_string(), "s0", "s1", Axis::Fidelity, Outcome::B, "x", true));
            recs.push(rec(&i.to_string(), "s0", "s1", Axis::Musicality, if i % 2 == 0 { Outcome::A } else { Outcome::B }, "x", true));
        }
        recs.push(rec("t", "s0", "s1", Axis::Musicality, Outcome::Tie, "x", false));
        let tests = position_bias_test(&recs).unwrap();
        assert_eq!(tests.len(), 3);
        assert_eq!(tests[0].second_wins, 20);
        assert!((tests[0].p_value - 1.9073486328125e-6).abs() < 1e-15);
        assert_eq!(tests[1].non_ties, 20);
        assert_eq!(tests[1].p_value, 1.0);
        let ties = [rec("t", "s0", "s1", Axis::Fidelity, Outcome::Tie, "x", true)];
        assert!(matches!(position_bias_test(&ties), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn swapped_slots_count_as_second_wins() {
        let r = rec("p", "s0", "s1", Axis::Fidelity, Outcome::A, "x", false);
        assert_eq!(r.second_won(), Some(true));
    }

    #[test]
    fn agreement_rules() {
        let all_a: Vec<_> = ["x", "y", "z"]
            .iter()
            .map(|a| rec("p", "s0", "s1", Axis::Fidelity, Outcome::A, a, true))
            .collect();
        assert_eq!(agreement(&all_a).fraction, Some(1.0));
        let split = [
            rec("p", "s0", "s1", Axis::Fidelity, Outcome::A, "x", true),
            rec("p", "s0", "s1", Axis::Fidelity, Outcome::B, "y", true),
        ];
        assert_eq!(agreement(&split).fraction, Some(0.0));
        let with_tie = [
            rec("p", "s0", "s1", Axis::Fidelity, Outcome::A, "x", true),
            rec("p", "s0", "s1", Axis::Fidelity, Outcome::Tie, "y", true),
            rec("p", "s0", "s1", Axis::Fidelity, Outcome::A, "z", true),
            rec("q", "s0", "s1", Axis::Fidelity, Outcome::A, "z", true),
        ];
        let a = agreement(&with_tie);
        assert_eq!((a.agreeing, a.eligible), (1, 1));
        // same system picked from opposite slots
        let swapped = [
            rec("p", "s0", "s1", Axis::Fidelity, Outcome::A, "x", true),
            rec("p", "s1", "s0", Axis::Fidelity, Outcome::B, "y", true),
        ];
        assert_eq!(agreement(&swapped).fraction, Some(1.0));
        assert_eq!(agreement(&[]).fraction, None);
    }

    #[test]
    fn rank_correlation_identity_and_errors() {
        let sys = names(5);
        let bt = BtScores {
            systems: sys.clone(),
            scores: vec![30.0, 25.0, 20.0, 15.0, 10.0],
            iterations: 1,
        };
        let rc = rank_correlation(&sys, &bt.scores, Orientation::HigherBetter, &bt).unwrap();
        assert_eq!(rc.tau, 1.0);
        let inverted: Vec<f64> = bt.scores.iter().map(|s| -s).collect();
        assert_eq!(rank_correlation(&sys, &inverted, Orientation::LowerBetter, &bt).unwrap().tau, 1.0);
        assert!(matches!(
            rank_correlation(&names(4), &[1.0; 4], Orientation::LowerBetter, &bt),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let recs = vec![
            rec("p1", "s0", "s1", Axis::Fidelity, Outcome::Tie, "x", true),
            rec("p2", "s1", "s0", Axis::Musicality, Outcome::B, "y", false),
        ];
        write_preferences(&recs, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("pair_id,system_a,system_b,axis,outcome,annotator,position_a_first\n"));
        assert_eq!(read_preferences(&path).unwrap(), recs);
        std::fs::write(&path, "pair_id,system_a,system_b,axis,outcome,annotator,position_a_first\np,a,b,fidelity,A,x,1\n").unwrap();
        assert!(read_preferences(&path).unwrap()[0].position_a_first);
        std::fs::write(&path, "pair_id,system_a,system_b,axis,outcome,annotator,position_a_first\np,a,b,loudness,A,x,1\n").unwrap();
        assert!(matches!(read_preferences(&path), Err(Error::Format(_))));
    }
}
