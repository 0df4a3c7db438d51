//! Forest pruning on a validation prediction matrix.
//!
//! All methods report the validation MSPE of the returned sub-forest in the
//! canonical form: predictions `Σ_{i ∈ S, ascending} w_i · P[:, i]` with
//! `w_i = 1/|S|` for the combinatorial methods, so a reported value can be
//! reproduced exactly by [`subset_mspe`].
//!
//! Traces use the first-minimum rule: when several iterations reach the
//! smallest MSPE, the earliest wins.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::PredictionMatrix;
use crate::matrix::ColMatrix;
use crate::nnlasso::{cv_select_lambda, CvOptions, Gram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    Sfs,
    SbsPrime,
    Bsf,
    Lasso,
    LassoK,
}

/// A pruning method together with its size parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MethodSpec {
    Sfs,
    SbsPrime,
    Bsf { k: usize },
    Lasso { max_trees: Option<usize> },
}

impl MethodSpec {
    pub const DEFAULT_K: usize = 4;

    pub fn method(&self) -> Method {
        match self {
            MethodSpec::Sfs => Method::Sfs,
            MethodSpec::SbsPrime => Method::SbsPrime,
            MethodSpec::Bsf { .. } => Method::Bsf,
            MethodSpec::Lasso { max_trees: None } => Method::Lasso,
            MethodSpec::Lasso { max_trees: Some(_) } => Method::LassoK,
        }
    }

    pub const VALID: &'static str = "sfs, sbs_prime (or sbs'), bsf, bsf<K>, lasso, lasso<K>";
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodSpec::Sfs => f.write_str("SFS"),
            MethodSpec::SbsPrime => f.write_str("SBS'"),
            MethodSpec::Bsf { k } if *k == Self::DEFAULT_K => f.write_str("BSF"),
            MethodSpec::Bsf { k } => write!(f, "BSF{k}"),
            MethodSpec::Lasso { max_trees: None } => f.write_str("LASSO"),
            MethodSpec::Lasso { max_trees: Some(m) } => write!(f, "LASSO{m}"),
        }
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let bad = || Error::config(format!("unknown pruning method '{s}'; valid methods: {}", Self::VALID));
        let count = |digits: &str| -> Result<usize> {
            match digits.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(k),
                _ => Err(bad()),
            }
        };
        match lower.as_str() {
            "sfs" => Ok(MethodSpec::Sfs),
            "sbs_prime" | "sbs'" | "sbsprime" => Ok(MethodSpec::SbsPrime),
            "bsf" => Ok(MethodSpec::Bsf { k: Self::DEFAULT_K }),
            "lasso" => Ok(MethodSpec::Lasso { max_trees: None }),
            _ => {
                if let Some(d) = lower.strip_prefix("bsf") {
                    Ok(MethodSpec::Bsf { k: count(d)? })
                } else if let Some(d) = lower.strip_prefix("lasso") {
                    Ok(MethodSpec::Lasso {
                        max_trees: Some(count(d)?),
                    })
                } else {
                    Err(bad())
                }
            }
        }
    }
}

impl TryFrom<String> for MethodSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MethodSpec> for String {
    fn from(m: MethodSpec) -> String {
        m.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneResult {
    pub method: Method,
    /// Label such as `SFS`, `BSF` or `LASSO4`.
    pub label: String,
    /// Ascending tree indices.
    pub selected: Vec<usize>,
    /// Weight of each selected tree, aligned with `selected`.
    pub weights: Vec<f64>,
    pub validation_mspe: f64,
    pub trace: Vec<f64>,
    /// Lasso only: the selected penalty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Lasso only: the CV fit was all zero and the best single tree was used.
    #[serde(default)]
    pub fallback: bool,
}

impl PruneResult {
    /// Weights expanded to a length-`b` vector.
    pub fn dense_weights(&self, b: usize) -> Vec<f64> {
        let mut w = vec![0.0; b];
        for (&i, &v) in self.selected.iter().zip(&self.weights) {
            w[i] = v;
        }
        w
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: PruneResult = serde_json::from_str(text)?;
        if r.selected.is_empty() || r.selected.len() != r.weights.len() {
            return Err(Error::invalid(
                "prune result needs matching, non-empty indices and weights",
            ));
        }
        if r.selected.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("prune result indices must be strictly ascending"));
        }
        Ok(r)
    }
}

fn check(p: &PredictionMatrix, y: &[f64]) -> Result<()> {
    if p.n_trees() == 0 || p.n_rows() == 0 {
        return Err(Error::invalid("prediction matrix is empty"));
    }
    if y.len() != p.n_rows() {
        return Err(Error::invalid(format!(
            "{} responses for a prediction matrix with {} rows",
            y.len(),
            p.n_rows()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("responses must be finite"));
    }
    Ok(())
}

fn mspe_of(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y.len() as f64
}

/// Canonical weighted sub-forest prediction over ascending `subset`.
pub fn subset_predictions(p: &PredictionMatrix, subset: &[usize], weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.n_rows()];
    for (&i, &w) in subset.iter().zip(weights) {
        for (o, &x) in out.iter_mut().zip(p.column(i)) {
            *o += w * x;
        }
    }
    out
}

/// Validation MSPE of the uniform-weight sub-forest on `subset` (ascending).
pub fn subset_mspe(p: &PredictionMatrix, y: &[f64], subset: &[usize]) -> f64 {
    let w = vec![1.0 / subset.len() as f64; subset.len()];
    mspe_of(&subset_predictions(p, subset, &w), y)
}

fn uniform_result(
    method: Method,
    label: String,
    mut selected: Vec<usize>,
    p: &PredictionMatrix,
    y: &[f64],
    trace: Vec<f64>,
) -> PruneResult {
    selected.sort_unstable();
    let k = selected.len();
    PruneResult {
        method,
        label,
        validation_mspe: subset_mspe(p, y, &selected),
        weights: vec![1.0 / k as f64; k],
        selected,
        trace,
        lambda: None,
        fallback: false,
    }
}

fn first_min(trace: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in trace.iter().enumerate() {
        if v < trace[best] {
            best = i;
        }
    }
    best
}

/// Sequential forward selection: add, one at a time, the tree whose inclusion
/// gives the smallest validation MSPE, through all `B` steps; return the
/// prefix at the trace minimum.
pub fn prune_sfs(p: &PredictionMatrix, y: &[f64]) -> Result<PruneResult> {
    check(p, y)?;
    let b = p.n_trees();
    let n = p.n_rows();
    let mut sum = vec![0.0; n];
    let mut chosen: Vec<usize> = Vec::with_capacity(b);
    let mut used = vec![false; b];
    let mut trace = Vec::with_capacity(b);
    for step in 0..b {
        let inv = 1.0 / (step + 1) as f64;
        let mut best: Option<(usize, f64)> = None;
        for j in (0..b).filter(|&j| !used[j]) {
            let col = p.column(j);
            let score: f64 = (0..n)
                .map(|r| {
                    let e = (sum[r] + col[r]) * inv - y[r];
                    e * e
                })
                .sum();
            if best.is_none_or(|(_, s)| score < s) {
                best = Some((j, score));
            }
        }
        let (j, _) = best.expect("an unused tree remains");
        used[j] = true;
        chosen.push(j);
        for (s, &x) in sum.iter_mut().zip(p.column(j)) {
            *s += x;
        }
        let mut set = chosen.clone();
        set.sort_unstable();
        trace.push(subset_mspe(p, y, &set));
    }
    let keep = first_min(&trace) + 1;
    Ok(uniform_result(
        Method::Sfs,
        "SFS".into(),
        chosen[..keep].to_vec(),
        p,
        y,
        trace,
    ))
}

/// Modified sequential backward selection: repeatedly drop the tree whose
/// removal changes validation MSPE the least in absolute value; the trace
/// starts with the full forest and ends at a single tree.
pub fn prune_sbs_prime(p: &PredictionMatrix, y: &[f64]) -> Result<PruneResult> {
    check(p, y)?;
    let b = p.n_trees();
    let n = p.n_rows();
    let mut current: Vec<usize> = (0..b).collect();
    let mut m_cur = subset_mspe(p, y, &current);
    let mut trace = vec![m_cur];
    let mut sets = vec![current.clone()];
    while current.len() > 1 {
        let k = current.len();
        let mut sum = vec![0.0; n];
        for &i in &current {
            for (s, &x) in sum.iter_mut().zip(p.column(i)) {
                *s += x;
            }
        }
        let inv = 1.0 / (k - 1) as f64;
        let mut best: Option<(usize, f64)> = None;
        for (pos, &j) in current.iter().enumerate() {
            let col = p.column(j);
            let m_j = (0..n)
                .map(|r| {
                    let e = (sum[r] - col[r]) * inv - y[r];
                    e * e
                })
                .sum::<f64>()
                / n as f64;
            let diff = (m_cur - m_j).abs();
            if best.is_none_or(|(_, d)| diff < d) {
                best = Some((pos, diff));
            }
        }
        let (pos, _) = best.expect("current set is non-empty");
        current.remove(pos);
        m_cur = subset_mspe(p, y, &current);
        trace.push(m_cur);
        sets.push(current.clone());
    }
    let at = first_min(&trace);
    Ok(uniform_result(
        Method::SbsPrime,
        "SBS'".into(),
        sets.swap_remove(at),
        p,
        y,
        trace,
    ))
}

/// Checks `1 ≤ K ≤ B/2`. A single-tree forest admits `K = 1`.
pub fn check_bsf_k(b: usize, k: usize) -> Result<()> {
    if k == 0 || (2 * k > b && !(b == 1 && k == 1)) {
        return Err(Error::config(format!("BSF needs 1 <= K <= B/2; got K={k} with B={b}")));
    }
    Ok(())
}

/// Calls `f` on every subset of `0..b` of size `1..=k`, by size, then in
/// lexicographic order.
fn for_each_subset(b: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = Vec::with_capacity(k);
    for size in 1..=k.min(b) {
        idx.clear();
        idx.extend(0..size);
        loop {
            f(&idx);
            let mut pos = size;
            let next = loop {
                if pos == 0 {
                    break None;
                }
                pos -= 1;
                if idx[pos] < b - size + pos {
                    break Some(pos);
                }
            };
            let Some(pos) = next else { break };
            idx[pos] += 1;
            for q in pos + 1..size {
                idx[q] = idx[q - 1] + 1;
            }
        }
    }
}

/// Best sub-forest: exhaustive search over all subsets of size `1..=K`.
///
/// Subsets are screened with the Gram identity
/// `n·MSPE(S) = yᵀy − (2/k) Σ_S c_i + (1/k²) Σ_{S×S} G_ij`; every subset whose
/// screened value lies within a rounding margin of the best is re-scored
/// canonically, and the first (by size, then lexicographic order) with the
/// smallest canonical MSPE wins.
pub fn prune_bsf(p: &PredictionMatrix, y: &[f64], k: usize) -> Result<PruneResult> {
    check(p, y)?;
    let b = p.n_trees();
    check_bsf_k(b, k)?;
    let gram = Gram::new(&p.values, y);
    let n = p.n_rows() as f64;
    let screen = |s: &[usize]| -> f64 {
        let kk = s.len() as f64;
        let mut cs = 0.0;
        let mut gs = 0.0;
        for &i in s {
            cs += gram.c[i];
            for &j in s {
                gs += gram.g[i * b + j];
            }
        }
        (gram.yty - 2.0 * cs / kk + gs / (kk * kk)) / n
    };
    let mut best_screen = f64::INFINITY;
    for_each_subset(b, k, |s| best_screen = best_screen.min(screen(s)));
    let max_diag = (0..b).map(|i| gram.g[i * b + i]).fold(0.0, f64::max);
    let eps = 1e-9 * (gram.yty + max_diag) / n;

    let mut best: Option<(Vec<usize>, f64)> = None;
    for_each_subset(b, k, |s| {
        if screen(s) <= best_screen + eps {
            let m = subset_mspe(p, y, s);
            if best.as_ref().is_none_or(|(_, bm)| m < *bm) {
                best = Some((s.to_vec(), m));
            }
        }
    });
    let (set, _) = best.expect("at least one subset is enumerated");
    let label = MethodSpec::Bsf { k }.to_string();
    Ok(uniform_result(Method::Bsf, label, set, p, y, Vec::new()))
}

/// Non-negative Lasso pruning.
///
/// Cross-validates λ, fits at the selected value and keeps trees with
/// positive weight. With `max_trees = Some(m)` and more than `m` survivors,
/// only the `m` largest coefficients stay free and cross-validation is re-run
/// on that restricted design. An all-zero fit falls back to the single tree
/// with the smallest validation MSPE, weighted by its one-column least-squares
/// coefficient, and sets `fallback`.
pub fn prune_lasso(p: &PredictionMatrix, y: &[f64], max_trees: Option<usize>, cv: &CvOptions) -> Result<PruneResult> {
    check(p, y)?;
    if max_trees == Some(0) {
        return Err(Error::config("max_trees must be >= 1"));
    }
    let b = p.n_trees();
    let (mut lambda, path) = cv_select_lambda(&p.values, y, cv)?;
    let mut beta = path.selected_fit().coefficients.clone();
    let nonzero: Vec<usize> = (0..b).filter(|&j| beta[j] > 0.0).collect();
    if let Some(m) = max_trees {
        if nonzero.len() > m {
            let mut order = nonzero.clone();
            order.sort_by(|&a, &c| beta[c].total_cmp(&beta[a]).then(a.cmp(&c)));
            let mut keep = order[..m].to_vec();
            keep.sort_unstable();
            let restricted = p.values.select_columns(&keep);
            let (l, sub) = cv_select_lambda(&restricted, y, cv)?;
            lambda = l;
            beta = vec![0.0; b];
            for (&j, &v) in keep.iter().zip(&sub.selected_fit().coefficients) {
                beta[j] = v;
            }
        }
    }
    let (method, label) = match max_trees {
        None => (Method::Lasso, "LASSO".to_string()),
        Some(m) => (Method::LassoK, format!("LASSO{m}")),
    };
    let selected: Vec<usize> = (0..b).filter(|&j| beta[j] > 0.0).collect();
    if selected.is_empty() {
        return Ok(lasso_fallback(p, y, method, label, lambda));
    }
    let weights: Vec<f64> = selected.iter().map(|&j| beta[j]).collect();
    Ok(PruneResult {
        method,
        label,
        validation_mspe: mspe_of(&subset_predictions(p, &selected, &weights), y),
        selected,
        weights,
        trace: Vec::new(),
        lambda: Some(lambda),
        fallback: false,
    })
}

fn lasso_fallback(p: &PredictionMatrix, y: &[f64], method: Method, label: String, lambda: f64) -> PruneResult {
    log::warn!("lasso selected no trees; falling back to the best single tree");
    let b = p.n_trees();
    let mut best = 0;
    let mut best_m = f64::INFINITY;
    for j in 0..b {
        let m = subset_mspe(p, y, &[j]);
        if m < best_m {
            best = j;
            best_m = m;
        }
    }
    let col = p.column(best);
    let gjj: f64 = col.iter().map(|v| v * v).sum();
    let cj: f64 = col.iter().zip(y).map(|(a, b)| a * b).sum();
    let mut w = if gjj > 0.0 { (cj / gjj).max(0.0) } else { 0.0 };
    if w == 0.0 {
        w = 1.0;
    }
    PruneResult {
        method,
        label,
        validation_mspe: mspe_of(&subset_predictions(p, &[best], &[w]), y),
        selected: vec![best],
        weights: vec![w],
        trace: Vec::new(),
        lambda: Some(lambda),
        fallback: true,
    }
}

pub fn prune(p: &PredictionMatrix, y: &[f64], spec: MethodSpec, cv: &CvOptions) -> Result<PruneResult> {
    match spec {
        MethodSpec::Sfs => prune_sfs(p, y),
        MethodSpec::SbsPrime => prune_sbs_prime(p, y),
        MethodSpec::Bsf { k } => prune_bsf(p, y, k),
        MethodSpec::Lasso { max_trees } => prune_lasso(p, y, max_trees, cv),
    }
}

/// Replacing tree `j` by the mean of the other trees (a "ghost") leaves the
/// forest predicting exactly the leave-`j`-out mean. Returns
/// `(ghost_mspe, sbs_mspe)`.
pub fn ghost_equivalence_check(p: &PredictionMatrix, y: &[f64], j: usize) -> Result<(f64, f64)> {
    check(p, y)?;
    let b = p.n_trees();
    if b < 2 {
        return Err(Error::invalid("ghost check needs at least two trees"));
    }
    if j >= b {
        return Err(Error::invalid(format!("tree index {j} out of range for {b} trees")));
    }
    let others: Vec<usize> = (0..b).filter(|&i| i != j).collect();
    let ghost = subset_predictions(p, &others, &vec![1.0 / (b - 1) as f64; b - 1]);
    let mut cols: Vec<Vec<f64>> = (0..b).map(|i| p.column(i).to_vec()).collect();
    cols[j] = ghost;
    let replaced = PredictionMatrix::new(ColMatrix::from_columns(&cols)?, p.row_indices.clone())?;
    let all: Vec<usize> = (0..b).collect();
    Ok((subset_mspe(&replaced, y, &all), subset_mspe(p, y, &others)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn random_instance(rng: &mut SeededRng, n: usize, b: usize) -> (PredictionMatrix, Vec<f64>) {
        let y: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let cols: Vec<Vec<f64>> = (0..b)
            .map(|_| {
                let bias = rng.normal() * 0.3;
                y.iter().map(|v| v + bias + rng.normal()).collect()
            })
            .collect();
        (PredictionMatrix::from_columns(&cols).unwrap(), y)
    }

    fn oracle_mean_mspe(p: &PredictionMatrix, y: &[f64], set: &[usize]) -> f64 {
        (0..y.len())
            .map(|r| {
                let m = set.iter().map(|&i| p.column(i)[r]).sum::<f64>() / set.len() as f64;
                (m - y[r]).powi(2)
            })
            .sum::<f64>()
            / y.len() as f64
    }

    #[test]
    fn method_names_round_trip() {
        for s in ["SFS", "SBS'", "BSF", "BSF3", "LASSO", "LASSO4"] {
            let m: MethodSpec = s.parse().unwrap();
            assert_eq!(m.to_string(), s);
        }
        assert_eq!("sbs_prime".parse::<MethodSpec>().unwrap(), MethodSpec::SbsPrime);
        let err = "ridge".parse::<MethodSpec>().unwrap_err().to_string();
        assert!(err.contains("sfs") && err.contains("lasso"));
        assert!("bsf0".parse::<MethodSpec>().is_err());
    }

    #[test]
    fn subset_enumeration_order() {
        let mut seen = Vec::new();
        for_each_subset(4, 2, |s| seen.push(s.to_vec()));
        let expect: Vec<Vec<usize>> = vec![
            vec![0],
            vec![1],
            vec![2],
            vec![3],
            vec![0, 1],
            vec![0, 2],
            vec![0, 3],
            vec![1, 2],
            vec![1, 3],
            vec![2, 3],
        ];
        assert_eq!(seen, expect);
        let mut count = 0;
        for_each_subset(8, 3, |_| count += 1);
        assert_eq!(count, 8 + 28 + 56);
        let mut one = Vec::new();
        for_each_subset(1, 1, |s| one.push(s.to_vec()));
        assert_eq!(one, vec![vec![0]]);
    }

    #[test]
    fn single_tree_is_forced() {
        let p = PredictionMatrix::from_columns(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let y = [1.0, 2.0, 2.0];
        for r in [
            prune_sfs(&p, &y).unwrap(),
            prune_sbs_prime(&p, &y).unwrap(),
            prune_bsf(&p, &y, 1).unwrap(),
        ] {
            assert_eq!(r.selected, vec![0]);
            assert_eq!(r.weights, vec![1.0]);
        }
    }

    #[test]
    fn sfs_picks_perfect_predictor() {
        let mut rng = SeededRng::new(1);
        let y: Vec<f64> = (0..30).map(|_| rng.normal()).collect();
        let noise: Vec<f64> = (0..30).map(|_| rng.normal()).collect();
        let p = PredictionMatrix::from_columns(&[y.clone(), noise]).unwrap();
        let r = prune_sfs(&p, &y).unwrap();
        assert_eq!(r.trace[0], 0.0);
        assert_eq!(r.selected, vec![0]);
        assert_eq!(r.trace[1], subset_mspe(&p, &y, &[0, 1]));
    }

    #[test]
    fn sbs_duplicate_columns_keep_full_forest() {
        let c = vec![1.0, 0.0, 2.0];
        let p = PredictionMatrix::from_columns(&[c.clone(), c]).unwrap();
        let y = [0.5, 0.5, 0.5];
        let r = prune_sbs_prime(&p, &y).unwrap();
        assert_eq!(r.trace.len(), 2);
        assert_eq!(r.trace[0], r.trace[1]);
        assert_eq!(r.selected, vec![0, 1]);
    }

    #[test]
    fn bsf_k1_is_best_single_tree_and_exact_pair_found() {
        let mut rng = SeededRng::new(2);
        let (p, y) = random_instance(&mut rng, 30, 6);
        let r = prune_bsf(&p, &y, 1).unwrap();
        let best = (0..6)
            .min_by(|&a, &b| oracle_mean_mspe(&p, &y, &[a]).total_cmp(&oracle_mean_mspe(&p, &y, &[b])))
            .unwrap();
        assert_eq!(r.selected, vec![best]);

        let cols: Vec<Vec<f64>> = (0..6).map(|_| (0..20).map(|_| rng.normal()).collect()).collect();
        let target: Vec<f64> = (0..20).map(|r| 0.5 * cols[2][r] + 0.5 * cols[5][r]).collect();
        let p = PredictionMatrix::from_columns(&cols).unwrap();
        let r = prune_bsf(&p, &target, 2).unwrap();
        assert_eq!(r.selected, vec![2, 5]);
        assert!(r.validation_mspe < 1e-30);
    }

    #[test]
    fn bsf_rejects_bad_k() {
        let mut rng = SeededRng::new(3);
        let (p, y) = random_instance(&mut rng, 10, 6);
        assert!(prune_bsf(&p, &y, 0).is_err());
        assert!(prune_bsf(&p, &y, 4).is_err());
        assert!(prune_bsf(&p, &y, 3).is_ok());
    }

    #[test]
    fn bsf_non_increasing_in_k() {
        let mut rng = SeededRng::new(4);
        let (p, y) = random_instance(&mut rng, 25, 10);
        let ms: Vec<f64> = (1..=5).map(|k| prune_bsf(&p, &y, k).unwrap().validation_mspe).collect();
        assert!(ms.windows(2).all(|w| w[1] <= w[0]), "{ms:?}");
    }

    #[test]
    fn sfs_trace_ends_at_full_forest() {
        let mut rng = SeededRng::new(5);
        let (p, y) = random_instance(&mut rng, 20, 7);
        let r = prune_sfs(&p, &y).unwrap();
        let all: Vec<usize> = (0..7).collect();
        assert_eq!(*r.trace.last().unwrap(), subset_mspe(&p, &y, &all));
        assert_eq!(r.validation_mspe, r.trace.iter().copied().fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn ghost_tree_matches_leave_one_out() {
        let mut rng = SeededRng::new(6);
        for b in 2..9 {
            let (p, y) = random_instance(&mut rng, 30, b);
            let scale = y.iter().map(|v| v * v).sum::<f64>() / 30.0 + 1.0;
            for j in 0..b {
                let (g, s) = ghost_equivalence_check(&p, &y, j).unwrap();
                assert!((g - s).abs() <= 1e-12 * scale);
            }
        }
        let p = PredictionMatrix::from_columns(&[vec![1.0, 2.0], vec![3.0, 1.0]]).unwrap();
        let y = [0.0, 0.0];
        let (g, s) = ghost_equivalence_check(&p, &y, 0).unwrap();
        assert_eq!(s, 5.0);
        assert!((g - 5.0).abs() < 1e-12);
        let c = vec![1.0, 2.0];
        let p = PredictionMatrix::from_columns(&[c.clone(), c.clone(), c]).unwrap();
        let (g, s) = ghost_equivalence_check(&p, &[0.0, 1.0], 1).unwrap();
        let full = subset_mspe(&p, &[0.0, 1.0], &[0, 1, 2]);
        assert!((g - full).abs() < 1e-12 && (s - full).abs() < 1e-12);
        assert!(ghost_equivalence_check(&p, &[0.0, 1.0], 3).is_err());
    }

    #[test]
    fn lasso_finds_scaled_column() {
        let mut rng = SeededRng::new(7);
        let cols: Vec<Vec<f64>> = (0..8).map(|_| (0..60).map(|_| rng.normal()).collect()).collect();
        let y: Vec<f64> = cols[4].iter().map(|v| 3.0 * v).collect();
        let p = PredictionMatrix::from_columns(&cols).unwrap();
        let r = prune_lasso(&p, &y, None, &CvOptions::default()).unwrap();
        assert!(r.selected.contains(&4));
        let var = y.iter().map(|v| v * v).sum::<f64>() / 60.0;
        assert!(r.validation_mspe < 1e-6 * var, "{}", r.validation_mspe);
        assert!(!r.fallback);
    }

    #[test]
    fn lasso_cap_inactive_when_b() {
        let mut rng = SeededRng::new(8);
        let (p, y) = random_instance(&mut rng, 60, 10);
        let plain = prune_lasso(&p, &y, None, &CvOptions::default()).unwrap();
        let capped = prune_lasso(&p, &y, Some(10), &CvOptions::default()).unwrap();
        assert_eq!(plain.selected, capped.selected);
        assert_eq!(plain.weights, capped.weights);
        let four = prune_lasso(&p, &y, Some(2), &CvOptions::default()).unwrap();
        assert!(four.selected.len() <= 2);
        assert_eq!(four.label, "LASSO2");
    }

    #[test]
    fn lasso_fallback_on_negative_columns() {
        let y = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        let cols = vec![
            y.iter().map(|v| -v).collect::<Vec<f64>>(),
            y.iter().map(|v| -2.0 * v).collect(),
        ];
        let p = PredictionMatrix::from_columns(&cols).unwrap();
        let r = prune_lasso(
            &p,
            &y,
            None,
            &CvOptions {
                folds: 2,
                ..CvOptions::default()
            },
        )
        .unwrap();
        assert!(r.fallback);
        assert_eq!(r.selected, vec![0]);
        assert_eq!(r.weights, vec![1.0]);
    }

    #[test]
    fn json_round_trip() {
        let mut rng = SeededRng::new(9);
        let (p, y) = random_instance(&mut rng, 20, 6);
        let r = prune_bsf(&p, &y, 2).unwrap();
        let back = PruneResult::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert!(r.to_json().unwrap().contains("\"BSF\""));
    }
}
