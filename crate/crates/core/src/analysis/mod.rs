//! Error accounting and method comparison: MSPE, the Wilcoxon signed-rank
//! test, correlation distances between trees and classical MDS.

mod mds;
mod wilcoxon;

use serde::{Deserialize, Serialize};

pub use mds::{
    classical_mds, correlation_distance, kruskal_stress, pairwise_distances, write_layout_csv, DistanceMatrix,
    MdsLayout,
};
pub use wilcoxon::{wilcoxon_exact_p, wilcoxon_normal_p, wilcoxon_signed_rank, WilcoxonResult, EXACT_MAX};

use crate::error::{Error, Result};

/// Mean squared prediction error.
pub fn mspe(predictions: &[f64], truth: &[f64]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} responses",
            predictions.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::invalid("MSPE of an empty sample"));
    }
    Ok(predictions
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / truth.len() as f64)
}

/// One method compared with one baseline over paired repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub method: String,
    pub baseline: String,
    pub reps: usize,
    pub mean_mspe: f64,
    pub baseline_mean_mspe: f64,
    /// `100 · (mean MSPE / baseline mean MSPE − 1)`.
    pub mspe_delta_pct: f64,
    pub p_value: f64,
    /// Share of repetitions where the method's MSPE ≤ the baseline's.
    pub freq_delta_leq_0: f64,
    pub mean_trees: f64,
    pub baseline_mean_trees: f64,
    pub trees_delta_pct: f64,
    pub trees_p_value: f64,
    /// `p_value` is below the Bonferroni-adjusted level.
    pub significant: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mspe_examples() {
        assert_eq!(mspe(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mspe(&[0.0; 3], &[1.0, 2.0, 2.0]).unwrap(), 3.0);
        assert_eq!(
            mspe(&[2.0, 0.0, 1.0], &[2.0, 1.0, 2.0]).unwrap(),
            mspe(&[0.0, 1.0, 2.0], &[1.0, 2.0, 2.0]).unwrap()
        );
        assert!(mspe(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mspe(&[], &[]).is_err());
    }
}
