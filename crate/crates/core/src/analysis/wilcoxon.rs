//! Two-sided Wilcoxon signed-rank test on paired samples.
//!
//! Zero differences are dropped before ranking and tied magnitudes share
//! their average rank. Up to [`EXACT_MAX`] non-zero pairs the null
//! distribution of `W+` is enumerated exactly by dynamic programming over
//! doubled ranks (average ranks are half-integers, so doubling keeps every
//! rank sum an integer). Larger samples use the normal approximation with
//! continuity and tie corrections.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EXACT_MAX: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of ranks of the positive differences `a − b`.
    pub statistic: f64,
    pub p_value: f64,
    pub n_effective: usize,
    pub exact: bool,
    /// Every pair was tied; the test carries no evidence and `p = 1`.
    pub all_zero: bool,
}

/// Doubled average ranks of `|d|` for the non-zero entries, with their signs.
fn doubled_ranks(diffs: &[f64]) -> Vec<(u64, bool)> {
    let mut nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    nz.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let mut out = Vec::with_capacity(nz.len());
    let mut i = 0;
    while i < nz.len() {
        let mut j = i;
        while j + 1 < nz.len() && nz[j + 1].abs() == nz[i].abs() {
            j += 1;
        }
        // Ranks i+1 ..= j+1 averaged, doubled: (i+1) + (j+1).
        let r2 = (i + j + 2) as u64;
        for d in &nz[i..=j] {
            out.push((r2, *d > 0.0));
        }
        i = j + 1;
    }
    out
}

fn tie_sizes(ranks: &[(u64, bool)]) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < ranks.len() {
        let mut j = i;
        while j < ranks.len() && ranks[j].0 == ranks[i].0 {
            j += 1;
        }
        sizes.push(j - i);
        i = j;
    }
    sizes
}

/// Exact two-sided p-value for the differences `diffs`.
pub fn wilcoxon_exact_p(diffs: &[f64]) -> f64 {
    let ranks = doubled_ranks(diffs);
    if ranks.is_empty() {
        return 1.0;
    }
    let total: u64 = ranks.iter().map(|r| r.0).sum();
    let w2: u64 = ranks.iter().filter(|r| r.1).map(|r| r.0).sum();
    let mut counts = vec![0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &(r, _) in &ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let all = 2f64.powi(ranks.len() as i32);
    let lower: f64 = counts[..=w2 as usize].iter().sum::<f64>() / all;
    let upper: f64 = counts[w2 as usize..].iter().sum::<f64>() / all;
    (2.0 * lower.min(upper)).min(1.0)
}

/// Normal-approximation two-sided p-value with continuity and tie correction.
pub fn wilcoxon_normal_p(diffs: &[f64]) -> f64 {
    let ranks = doubled_ranks(diffs);
    let n = ranks.len() as f64;
    if ranks.is_empty() {
        return 1.0;
    }
    let w: f64 = ranks.iter().filter(|r| r.1).map(|r| r.0 as f64 / 2.0).sum();
    let mean = n * (n + 1.0) / 4.0;
    let ties: f64 = tie_sizes(&ranks).iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - ties / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    libm::erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().any(|d| d.is_nan()) {
        return Err(Error::invalid("paired samples contain NaN"));
    }
    let ranks = doubled_ranks(&diffs);
    let n = ranks.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            statistic: 0.0,
            p_value: 1.0,
            n_effective: 0,
            exact: true,
            all_zero: true,
        });
    }
    let statistic = ranks.iter().filter(|r| r.1).map(|r| r.0 as f64 / 2.0).sum();
    let exact = n <= EXACT_MAX;
    let p_value = if exact {
        wilcoxon_exact_p(&diffs)
    } else {
        wilcoxon_normal_p(&diffs)
    };
    Ok(WilcoxonResult {
        statistic,
        p_value,
        n_effective: n,
        exact,
        all_zero: false,
    })
}
