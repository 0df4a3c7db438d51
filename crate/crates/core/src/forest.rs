//! Bagged CART forests with per-tree random feature subspaces.
//!
//! Tree `i` owns a seed derived from the forest seed and `i`. That seed fixes
//! both its feature mask and its bootstrap draw, so trees can be fitted in any
//! order or on any number of threads, and [`Forest::retrain`] can refit the
//! same trees on a larger row set while keeping the masks.
//!
//! Ensemble predictions are `Σ_i w_i · t_i(x)` accumulated in ascending tree
//! order starting from zero. The unweighted forest uses `w_i = 1/B`, so the
//! uniform and unweighted paths agree bit for bit.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cart::{fit_tree_counts, CartParams, RegressionTree, RowOrder};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::ColMatrix;
use crate::rng::{derive_seed, SeededRng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub params: CartParams,
    /// Probability that each feature enters a tree's subspace.
    pub subspace_rate: f64,
    pub seed: u64,
    /// Test hook: when false every tree sees each training row exactly once.
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 25,
            params: CartParams::default(),
            subspace_rate: 0.8,
            seed: 123,
            bootstrap: true,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::config("forest size must be >= 1"));
        }
        if !(self.subspace_rate > 0.0 && self.subspace_rate <= 1.0) {
            return Err(Error::config(format!(
                "subspace rate must lie in (0, 1], got {}",
                self.subspace_rate
            )));
        }
        self.params.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<RegressionTree>,
    pub feature_masks: Vec<Vec<bool>>,
    pub bootstrap_seeds: Vec<u64>,
    pub params: CartParams,
    pub subspace_rate: f64,
    pub bootstrap: bool,
    /// Width of the dataset schema the forest was trained on.
    pub n_features: usize,
}

pub fn fit_forest(
    dataset: &Dataset,
    train_indices: &[usize],
    n_trees: usize,
    params: &CartParams,
    subspace_rate: f64,
    seed: u64,
) -> Result<Forest> {
    fit_forest_with(
        dataset,
        train_indices,
        &ForestConfig {
            n_trees,
            params: *params,
            subspace_rate,
            seed,
            bootstrap: true,
        },
    )
}

pub fn fit_forest_with(dataset: &Dataset, train_indices: &[usize], config: &ForestConfig) -> Result<Forest> {
    config.validate()?;
    let d = dataset.n_cols();
    let bootstrap_seeds: Vec<u64> = (0..config.n_trees)
        .map(|i| derive_seed(config.seed, Stream::Tree, i as u64))
        .collect();
    let feature_masks = bootstrap_seeds
        .iter()
        .map(|&s| draw_mask(s, d, config.subspace_rate))
        .collect();
    let mut forest = Forest {
        trees: Vec::new(),
        feature_masks,
        bootstrap_seeds,
        params: config.params,
        subspace_rate: config.subspace_rate,
        bootstrap: config.bootstrap,
        n_features: d,
    };
    forest.trees = forest.grow(dataset, train_indices)?;
    Ok(forest)
}

fn draw_mask(tree_seed: u64, d: usize, rate: f64) -> Vec<bool> {
    let mut rng = SeededRng::new(derive_seed(tree_seed, Stream::Forest, 0));
    loop {
        let mask: Vec<bool> = (0..d).map(|_| rng.bernoulli(rate)).collect();
        if mask.iter().any(|&m| m) {
            return mask;
        }
    }
}

impl Forest {
    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// Refits every tree on `rows` with its original seed and feature mask.
    pub fn retrain(&self, dataset: &Dataset, rows: &[usize]) -> Result<Forest> {
        self.check_schema(dataset)?;
        let mut out = self.clone();
        out.trees = self.grow(dataset, rows)?;
        Ok(out)
    }

    fn grow(&self, dataset: &Dataset, rows: &[usize]) -> Result<Vec<RegressionTree>> {
        if rows.is_empty() {
            return Err(Error::invalid("cannot fit a forest on an empty training set"));
        }
        dataset.check_indices(rows)?;
        let order = RowOrder::new(dataset, rows);
        (0..self.bootstrap_seeds.len())
            .into_par_iter()
            .map(|i| {
                let mut counts = vec![0u32; dataset.n_rows()];
                if self.bootstrap {
                    let mut rng = SeededRng::new(self.bootstrap_seeds[i]);
                    for _ in 0..rows.len() {
                        counts[rows[rng.below(rows.len())]] += 1;
                    }
                } else {
                    for &r in rows {
                        counts[r] += 1;
                    }
                }
                fit_tree_counts(dataset, &order, &counts, &self.feature_masks[i], &self.params)
            })
            .collect()
    }

    pub fn check_schema(&self, dataset: &Dataset) -> Result<()> {
        if dataset.n_cols() != self.n_features {
            return Err(Error::invalid(format!(
                "forest expects {} features but the dataset has {}",
                self.n_features,
                dataset.n_cols()
            )));
        }
        Ok(())
    }

    /// Structural checks for forests read from disk.
    pub fn validate(&self) -> Result<()> {
        let b = self.trees.len();
        if b == 0 {
            return Err(Error::invalid("forest has no trees"));
        }
        if self.feature_masks.len() != b || self.bootstrap_seeds.len() != b {
            return Err(Error::invalid("forest masks and seeds do not match its tree count"));
        }
        for (i, (tree, mask)) in self.trees.iter().zip(&self.feature_masks).enumerate() {
            tree.validate()?;
            if mask.len() != self.n_features || !mask.iter().any(|&m| m) {
                return Err(Error::invalid(format!("tree {i} has an invalid feature mask")));
            }
            if tree.max_feature_index().is_some_and(|f| f >= self.n_features) {
                return Err(Error::invalid(format!(
                    "tree {i} splits on a feature outside the schema"
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let forest: Forest = serde_json::from_str(text)?;
        forest.validate()?;
        Ok(forest)
    }
}

/// Tree predictions on a set of rows: column `i` holds tree `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    pub values: ColMatrix,
    pub row_indices: Vec<usize>,
}

impl PredictionMatrix {
    pub fn new(values: ColMatrix, row_indices: Vec<usize>) -> Result<Self> {
        if values.nrows() != row_indices.len() {
            return Err(Error::invalid("prediction matrix rows do not match its row indices"));
        }
        if !values.is_finite() {
            return Err(Error::invalid("prediction matrix contains non-finite values"));
        }
        Ok(Self { values, row_indices })
    }

    /// Builds from per-tree columns; row indices default to `0..n`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let values = ColMatrix::from_columns(columns)?;
        let n = values.nrows();
        Self::new(values, (0..n).collect())
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_trees(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, i: usize) -> &[f64] {
        self.values.col(i)
    }

    /// `Σ_i w_i · column_i`, ascending `i`.
    pub fn weighted(&self, weights: &[f64]) -> Result<Vec<f64>> {
        check_weights(weights, self.n_trees())?;
        Ok(self.values.mul_vec(weights))
    }

    /// Uniform mean over all trees, in the canonical order.
    pub fn row_means(&self) -> Vec<f64> {
        let b = self.n_trees();
        self.values.mul_vec(&vec![1.0 / b as f64; b])
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["row".to_string()];
        header.extend((0..self.n_trees()).map(|i| format!("tree_{i}")));
        w.write_record(&header)?;
        for (r, &row) in self.row_indices.iter().enumerate() {
            let mut rec = vec![row.to_string()];
            rec.extend((0..self.n_trees()).map(|i| self.values.get(r, i).to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_weights(weights: &[f64], b: usize) -> Result<()> {
    if weights.len() != b {
        return Err(Error::invalid(format!("expected {b} weights, got {}", weights.len())));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::invalid("weights must be finite and non-negative"));
    }
    Ok(())
}

pub fn prediction_matrix(forest: &Forest, dataset: &Dataset, row_indices: &[usize]) -> Result<PredictionMatrix> {
    forest.check_schema(dataset)?;
    dataset.check_indices(row_indices)?;
    let columns: Vec<Vec<f64>> = forest
        .trees
        .par_iter()
        .map(|t| row_indices.iter().map(|&r| t.predict(dataset.row(r))).collect())
        .collect();
    PredictionMatrix::new(ColMatrix::from_columns(&columns)?, row_indices.to_vec())
}

/// Ensemble prediction. `None` means the uniform mean over all trees; explicit
/// weights are applied as given, without renormalisation.
pub fn predict_forest(
    forest: &Forest,
    dataset: &Dataset,
    row_indices: &[usize],
    weights: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if let Some(w) = weights {
        check_weights(w, forest.len())?;
    }
    let p = prediction_matrix(forest, dataset, row_indices)?;
    match weights {
        Some(w) => p.weighted(w),
        None => Ok(p.row_means()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cart::fit_tree;
    use crate::data::{generate_scenario, ScenarioConfig};

    fn scenario(n: usize, seed: u64) -> Dataset {
        generate_scenario(&ScenarioConfig::new(n, 2, 0.5, seed)).unwrap()
    }

    #[test]
    fn singleton_forest_equals_single_tree() {
        let ds = scenario(300, 1);
        let rows: Vec<usize> = (0..300).collect();
        let config = ForestConfig {
            n_trees: 1,
            subspace_rate: 1.0,
            bootstrap: false,
            ..ForestConfig::default()
        };
        let f = fit_forest_with(&ds, &rows, &config).unwrap();
        let t = fit_tree(&ds, &rows, &[true; 10], &CartParams::default()).unwrap();
        assert_eq!(f.trees[0], t);
        let p = predict_forest(&f, &ds, &rows, None).unwrap();
        for (i, &r) in rows.iter().enumerate() {
            assert_eq!(p[i], t.predict(ds.row(r)));
        }
    }

    #[test]
    fn mask_sizes_average_eighty_percent() {
        let ds = scenario(100, 2);
        let rows: Vec<usize> = (0..100).collect();
        let f = fit_forest(&ds, &rows, 25, &CartParams::default(), 0.8, 123).unwrap();
        let mean = f
            .feature_masks
            .iter()
            .map(|m| m.iter().filter(|&&b| b).count())
            .sum::<usize>() as f64
            / 25.0;
        assert!((mean - 8.0).abs() <= 1.0, "mean mask size {mean}");
        assert!(f.feature_masks.iter().all(|m| m.iter().any(|&b| b)));
    }

    #[test]
    fn empty_masks_are_redrawn() {
        for s in 0..200 {
            assert!(draw_mask(s, 2, 0.05).iter().any(|&b| b));
        }
    }

    #[test]
    fn deterministic_and_serializable() {
        let ds = scenario(200, 3);
        let rows: Vec<usize> = (0..150).collect();
        let a = fit_forest(&ds, &rows, 5, &CartParams::default(), 0.8, 9).unwrap();
        let b = fit_forest(&ds, &rows, 5, &CartParams::default(), 0.8, 9).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let back = Forest::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn weight_identities() {
        let ds = scenario(200, 4);
        let rows: Vec<usize> = (0..200).collect();
        let f = fit_forest(&ds, &rows, 6, &CartParams::default(), 0.8, 4).unwrap();
        let zeros = predict_forest(&f, &ds, &rows, Some(&[0.0; 6])).unwrap();
        assert!(zeros.iter().all(|&v| v == 0.0));
        let uniform = predict_forest(&f, &ds, &rows, Some(&[1.0 / 6.0; 6])).unwrap();
        assert_eq!(uniform, predict_forest(&f, &ds, &rows, None).unwrap());
        let mut e = [0.0; 6];
        e[3] = 1.0;
        let one = predict_forest(&f, &ds, &rows, Some(&e)).unwrap();
        for (i, &r) in rows.iter().enumerate() {
            assert_eq!(one[i], f.trees[3].predict(ds.row(r)));
        }
        assert!(predict_forest(&f, &ds, &rows, Some(&[1.0; 5])).is_err());
        assert!(predict_forest(&f, &ds, &rows, Some(&[-1.0, 0.0, 0.0, 0.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn matrix_columns_and_row_order() {
        let ds = scenario(50, 5);
        let f = Forest {
            trees: vec![RegressionTree::constant(1.5), RegressionTree::constant(-2.0)],
            feature_masks: vec![vec![true; 10]; 2],
            bootstrap_seeds: vec![0, 1],
            params: CartParams::default(),
            subspace_rate: 0.8,
            bootstrap: true,
            n_features: 10,
        };
        let p = prediction_matrix(&f, &ds, &[3, 1, 4]).unwrap();
        assert_eq!(p.column(0), &[1.5; 3]);
        assert_eq!(p.column(1), &[-2.0; 3]);

        let rows: Vec<usize> = (0..50).collect();
        let g = fit_forest(&ds, &rows, 4, &CartParams::default(), 0.8, 5).unwrap();
        let fwd = prediction_matrix(&g, &ds, &[1, 2, 3]).unwrap();
        let rev = prediction_matrix(&g, &ds, &[3, 2, 1]).unwrap();
        for i in 0..4 {
            let mut c = rev.column(i).to_vec();
            c.reverse();
            assert_eq!(fwd.column(i), &c[..]);
        }
    }

    #[test]
    fn row_means_match_independent_mean() {
        let ds = scenario(120, 6);
        let rows: Vec<usize> = (0..120).collect();
        let f = fit_forest(&ds, &rows, 7, &CartParams::default(), 0.8, 6).unwrap();
        let p = prediction_matrix(&f, &ds, &rows).unwrap();
        let means = p.row_means();
        for (r, &m) in means.iter().enumerate() {
            let oracle = (0..7).map(|i| p.values.get(r, i)).sum::<f64>() / 7.0;
            assert!((m - oracle).abs() <= 1e-12 * (1.0 + oracle.abs()));
        }
        assert_eq!(means, predict_forest(&f, &ds, &rows, None).unwrap());
    }

    #[test]
    fn in_sample_beats_constant() {
        let ds = scenario(400, 7);
        let rows: Vec<usize> = (0..400).collect();
        let f = fit_forest(&ds, &rows, 10, &CartParams::default(), 0.8, 7).unwrap();
        let p = predict_forest(&f, &ds, &rows, None).unwrap();
        let y = ds.response();
        let mean = y.iter().sum::<f64>() / 400.0;
        let forest_mspe: f64 = p.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 400.0;
        let const_mspe: f64 = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 400.0;
        assert!(forest_mspe <= const_mspe);
    }

    #[test]
    fn retrain_keeps_masks_and_seeds() {
        let ds = scenario(300, 8);
        let train: Vec<usize> = (0..200).collect();
        let all: Vec<usize> = (0..300).collect();
        let f = fit_forest(&ds, &train, 5, &CartParams::default(), 0.8, 8).unwrap();
        let g = f.retrain(&ds, &all).unwrap();
        assert_eq!(f.feature_masks, g.feature_masks);
        assert_eq!(f.bootstrap_seeds, g.bootstrap_seeds);
        assert_ne!(f.trees, g.trees);
        let again = fit_forest(&ds, &all, 5, &CartParams::default(), 0.8, 8).unwrap();
        assert_eq!(again.trees, g.trees);
    }

    #[test]
    fn schema_and_input_errors() {
        let ds = scenario(60, 9);
        let rows: Vec<usize> = (0..60).collect();
        assert!(fit_forest(&ds, &[], 3, &CartParams::default(), 0.8, 1).is_err());
        assert!(fit_forest(&ds, &rows, 0, &CartParams::default(), 0.8, 1).is_err());
        assert!(fit_forest(&ds, &rows, 3, &CartParams::default(), 0.0, 1).is_err());
        let f = fit_forest(&ds, &rows, 2, &CartParams::default(), 0.8, 1).unwrap();
        let narrow = Dataset::from_rows(&[vec![1.0, 2.0]], vec![0.0]).unwrap();
        let err = prediction_matrix(&f, &narrow, &[0]).unwrap_err().to_string();
        assert!(err.contains("10") && err.contains('2'), "{err}");
    }

    #[test]
    fn csv_export_has_tree_headers() {
        let p = PredictionMatrix::from_columns(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "row,tree_0,tree_1\n0,1,3\n1,2,4\n");
    }
}
