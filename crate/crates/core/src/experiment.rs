//! End-to-end pruning experiments.
//!
//! Each repetition draws its own data (for synthetic sources), split, forest
//! and cross-validation seeds from the master seed, so repetitions can run in
//! any order on any number of threads. Within a repetition:
//!
//! 1. split 60/20/20 and fit the forest on the training part;
//! 2. prune with every method on the validation prediction matrix;
//! 3. refit the same trees (seeds and masks unchanged) on train ∪ validation;
//! 4. score the full forest and each selection on the test part.
//!
//! Combinatorial selections keep their uniform weights after step 3. Lasso
//! weights are refitted by non-negative least squares on the refitted trees'
//! validation predictions with the support frozen.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{wilcoxon_signed_rank, ComparisonReport};
use crate::cart::CartParams;
use crate::data::{generate_scenario, load_csv, split, CsvOptions, Dataset, ScenarioConfig};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, prediction_matrix};
use crate::nnlasso::{fit_nnlasso, CvOptions};
use crate::pruning::{prune, subset_predictions, MethodSpec};
use crate::rng::{derive_seed, Stream};

pub const FULL: &str = "FULL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Scenario(ScenarioConfig),
    Csv {
        path: PathBuf,
        response_column: String,
        #[serde(default)]
        ordinal: BTreeMap<String, Vec<String>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: DataSource,
    #[serde(default = "defaults::forest_size")]
    pub forest_size: usize,
    /// Method names: `SFS`, `SBS'`, `BSF`, `LASSO`, `LASSO_K`, or explicit
    /// sizes such as `BSF3` and `LASSO4`. `BSF` uses `k`; `LASSO_K` uses
    /// `max_trees`.
    #[serde(default = "defaults::methods")]
    pub methods: Vec<String>,
    #[serde(default = "defaults::k")]
    pub k: usize,
    #[serde(default = "defaults::k")]
    pub max_trees: usize,
    #[serde(default = "defaults::reps")]
    pub reps: usize,
    #[serde(default = "defaults::ratios")]
    pub ratios: [f64; 3],
    #[serde(default = "defaults::seed")]
    pub master_seed: u64,
    #[serde(default)]
    pub cart: CartParams,
    #[serde(default = "defaults::subspace_rate")]
    pub subspace_rate: f64,
    #[serde(default)]
    pub cv: CvOptions,
    /// Refit Lasso weights after the forest is refitted.
    #[serde(default = "defaults::yes")]
    pub refit_lasso_weights: bool,
}

mod defaults {
    pub fn forest_size() -> usize {
        25
    }
    pub fn methods() -> Vec<String> {
        ["SFS", "SBS'", "BSF", "LASSO", "LASSO_K"].map(String::from).to_vec()
    }
    pub fn k() -> usize {
        4
    }
    pub fn reps() -> usize {
        100
    }
    pub fn ratios() -> [f64; 3] {
        [0.6, 0.2, 0.2]
    }
    pub fn seed() -> u64 {
        123
    }
    pub fn subspace_rate() -> f64 {
        0.8
    }
    pub fn yes() -> bool {
        true
    }
}

impl ExperimentConfig {
    pub fn scenario(scenario: ScenarioConfig) -> Self {
        Self {
            forest_size: scenario.forest_size,
            master_seed: scenario.seed,
            source: DataSource::Scenario(scenario),
            methods: defaults::methods(),
            k: defaults::k(),
            max_trees: defaults::k(),
            reps: defaults::reps(),
            ratios: defaults::ratios(),
            cart: CartParams::default(),
            subspace_rate: defaults::subspace_rate(),
            cv: CvOptions::default(),
            refit_lasso_weights: true,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::config(format!("invalid experiment config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::config("reps must be >= 1"));
        }
        if self.forest_size == 0 {
            return Err(Error::config("forest_size must be >= 1"));
        }
        if let DataSource::Scenario(s) = &self.source {
            s.validate()?;
        }
        self.resolved_methods()?;
        self.cart.validate()
    }

    /// Methods with their size parameters filled in.
    pub fn resolved_methods(&self) -> Result<Vec<MethodSpec>> {
        if self.methods.is_empty() {
            return Err(Error::config("no methods requested"));
        }
        let mut out: Vec<MethodSpec> = Vec::new();
        for name in &self.methods {
            let spec = match name.trim().to_ascii_lowercase().as_str() {
                "bsf" => MethodSpec::Bsf { k: self.k },
                "lasso_k" => MethodSpec::Lasso {
                    max_trees: Some(self.max_trees),
                },
                _ => name.parse()?,
            };
            if let MethodSpec::Bsf { k: 0 } | MethodSpec::Lasso { max_trees: Some(0) } = spec {
                return Err(Error::config(format!("method {name} needs a size >= 1")));
            }
            if out.contains(&spec) {
                return Err(Error::config(format!("method {spec} listed twice")));
            }
            out.push(spec);
        }
        Ok(out)
    }

    fn load(&self) -> Result<Option<Dataset>> {
        match &self.source {
            DataSource::Scenario(_) => Ok(None),
            DataSource::Csv {
                path,
                response_column,
                ordinal,
            } => Ok(Some(load_csv(
                path,
                response_column,
                &CsvOptions {
                    ordinal: ordinal.clone(),
                },
            )?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub label: String,
    /// Absent when the method failed.
    pub test_mspe: Option<f64>,
    pub validation_mspe: Option<f64>,
    pub n_trees: usize,
    pub selected: Vec<usize>,
    pub weights: Vec<f64>,
    pub wall_time_s: f64,
    pub failed: bool,
    pub error: Option<String>,
    /// Lasso found no trees and used the best single tree.
    pub fallback: bool,
    /// A refitted Lasso weight hit zero.
    pub weight_zeroed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub rep: usize,
    pub full_forest_test_mspe: f64,
    pub full_forest_trees: usize,
    pub methods: Vec<MethodOutcome>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let methods = config.resolved_methods()?;
    let shared = config.load()?;
    (0..config.reps)
        .into_par_iter()
        .map(|rep| run_rep(config, &methods, shared.as_ref(), rep))
        .collect()
}

fn run_rep(
    config: &ExperimentConfig,
    methods: &[MethodSpec],
    shared: Option<&Dataset>,
    rep: usize,
) -> Result<RunRecord> {
    let master = config.master_seed;
    let r = rep as u64;
    let owned;
    let data = match (&config.source, shared) {
        (_, Some(d)) => d,
        (DataSource::Scenario(s), None) => {
            owned = generate_scenario(&ScenarioConfig {
                seed: derive_seed(master, Stream::Data, r),
                ..s.clone()
            })?;
            &owned
        }
        (DataSource::Csv { .. }, None) => unreachable!("csv sources are loaded up front"),
    };
    let parts = split(data, config.ratios, derive_seed(master, Stream::Split, r))?;
    let b = config.forest_size;
    let forest = fit_forest(
        data,
        &parts.train,
        b,
        &config.cart,
        config.subspace_rate,
        derive_seed(master, Stream::Forest, r),
    )?;
    let p_val = prediction_matrix(&forest, data, &parts.validation)?;
    let y_val = data.responses_at(&parts.validation);
    let cv = CvOptions {
        seed: derive_seed(master, Stream::CrossValidation, r),
        ..config.cv.clone()
    };

    let mut pruned = Vec::with_capacity(methods.len());
    for spec in methods {
        let spec = match *spec {
            MethodSpec::Bsf { k } => MethodSpec::Bsf {
                k: k.min((b / 2).max(1)),
            },
            s => s,
        };
        let start = Instant::now();
        let result = prune(&p_val, &y_val, spec, &cv);
        pruned.push((spec, result, start.elapsed().as_secs_f64()));
    }

    let refit = forest.retrain(data, &parts.train_and_validation())?;
    let p_test = prediction_matrix(&refit, data, &parts.test)?;
    let p_val_refit = prediction_matrix(&refit, data, &parts.validation)?;
    let y_test = data.responses_at(&parts.test);
    let mse =
        |pred: &[f64]| pred.iter().zip(&y_test).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y_test.len() as f64;
    let full = mse(&p_test.row_means());

    let methods = pruned
        .into_iter()
        .map(|(spec, result, wall)| {
            // `spec` keeps the configured label even when K was clamped.
            let label = methods_label(methods, spec);
            match result {
                Err(e) => MethodOutcome {
                    label,
                    test_mspe: None,
                    validation_mspe: None,
                    n_trees: 0,
                    selected: Vec::new(),
                    weights: Vec::new(),
                    wall_time_s: wall,
                    failed: true,
                    error: Some(e.to_string()),
                    fallback: false,
                    weight_zeroed: false,
                },
                Ok(res) => {
                    let mut weights = res.weights.clone();
                    let mut weight_zeroed = false;
                    let mut error = None;
                    if matches!(spec, MethodSpec::Lasso { .. }) && config.refit_lasso_weights {
                        let x = p_val_refit.values.select_columns(&res.selected);
                        match fit_nnlasso(&x, &y_val, 0.0, Some(&weights), cv.tol, cv.max_iter) {
                            Ok(fit) => {
                                weight_zeroed = fit.coefficients.contains(&0.0);
                                weights = fit.coefficients;
                            }
                            Err(e) => error = Some(format!("weight refit failed: {e}")),
                        }
                    }
                    let n_trees = weights.iter().filter(|&&w| w > 0.0).count();
                    MethodOutcome {
                        label,
                        test_mspe: Some(mse(&subset_predictions(&p_test, &res.selected, &weights))),
                        validation_mspe: Some(res.validation_mspe),
                        n_trees,
                        selected: res.selected,
                        weights,
                        wall_time_s: wall,
                        failed: error.is_some(),
                        error,
                        fallback: res.fallback,
                        weight_zeroed,
                    }
                }
            }
        })
        .collect();

    Ok(RunRecord {
        rep,
        full_forest_test_mspe: full,
        full_forest_trees: b,
        methods,
    })
}

fn methods_label(configured: &[MethodSpec], used: MethodSpec) -> String {
    match used {
        MethodSpec::Bsf { .. } => configured
            .iter()
            .find(|m| matches!(m, MethodSpec::Bsf { .. }))
            .map_or_else(|| used.to_string(), |m| m.to_string()),
        _ => used.to_string(),
    }
}

/// Per-rep `(test MSPE, tree count)` for `label`, `None` where it failed.
fn series(records: &[RunRecord], label: &str) -> Vec<Option<(f64, f64)>> {
    records
        .iter()
        .map(|r| {
            if label == FULL {
                return Some((r.full_forest_test_mspe, r.full_forest_trees as f64));
            }
            r.methods
                .iter()
                .find(|m| m.label == label)
                .and_then(|m| m.test_mspe.map(|t| (t, m.n_trees as f64)))
        })
        .collect()
}

pub fn method_labels(records: &[RunRecord]) -> Vec<String> {
    let mut labels: Vec<String> = Vec::new();
    for r in records {
        for m in &r.methods {
            if !labels.contains(&m.label) {
                labels.push(m.label.clone());
            }
        }
    }
    labels
}

/// Every method against every baseline (`FULL` or a method label), paired
/// over the repetitions where both succeeded. The significance flag uses the
/// Bonferroni level `0.05 / number of methods`.
pub fn summarize(records: &[RunRecord], baselines: &[String]) -> Result<Vec<ComparisonReport>> {
    if records.is_empty() {
        return Err(Error::invalid("no records to summarize"));
    }
    let labels = method_labels(records);
    let alpha = 0.05 / labels.len().max(1) as f64;
    let mut out = Vec::with_capacity(labels.len() * baselines.len());
    for label in &labels {
        let ms = series(records, label);
        for base in baselines {
            if base != FULL && !labels.contains(base) {
                return Err(Error::config(format!("unknown baseline '{base}'")));
            }
            let bs = series(records, base);
            type Pair = ((f64, f64), (f64, f64));
            let pairs: Vec<Pair> = ms.iter().zip(&bs).filter_map(|(a, b)| Some(((*a)?, (*b)?))).collect();
            let n = pairs.len();
            let mean = |f: &dyn Fn(&Pair) -> f64| {
                if n == 0 {
                    f64::NAN
                } else {
                    pairs.iter().map(f).sum::<f64>() / n as f64
                }
            };
            let mean_mspe = mean(&|p| p.0 .0);
            let baseline_mean_mspe = mean(&|p| p.1 .0);
            let mean_trees = mean(&|p| p.0 .1);
            let baseline_mean_trees = mean(&|p| p.1 .1);
            let a: Vec<f64> = pairs.iter().map(|p| p.0 .0).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1 .0).collect();
            let at: Vec<f64> = pairs.iter().map(|p| p.0 .1).collect();
            let bt: Vec<f64> = pairs.iter().map(|p| p.1 .1).collect();
            let p_value = wilcoxon_signed_rank(&a, &b)?.p_value;
            let trees_p_value = wilcoxon_signed_rank(&at, &bt)?.p_value;
            out.push(ComparisonReport {
                method: label.clone(),
                baseline: base.clone(),
                reps: n,
                mean_mspe,
                baseline_mean_mspe,
                mspe_delta_pct: 100.0 * (mean_mspe / baseline_mean_mspe - 1.0),
                p_value,
                freq_delta_leq_0: if n == 0 {
                    f64::NAN
                } else {
                    pairs.iter().filter(|p| p.0 .0 <= p.1 .0).count() as f64 / n as f64
                },
                mean_trees,
                baseline_mean_trees,
                trees_delta_pct: 100.0 * (mean_trees / baseline_mean_trees - 1.0),
                trees_p_value,
                significant: p_value < alpha,
            });
        }
    }
    Ok(out)
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

const RECORD_HEADER: [&str; 10] = [
    "rep",
    "method",
    "test_mspe",
    "validation_mspe",
    "n_trees",
    "selected",
    "weights",
    "failed",
    "fallback",
    "weight_zeroed",
];

/// Long format: one `FULL` row and one row per method for every repetition.
pub fn write_records_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER)?;
    for r in records {
        w.write_record([
            r.rep.to_string(),
            FULL.to_string(),
            r.full_forest_test_mspe.to_string(),
            String::new(),
            r.full_forest_trees.to_string(),
            String::new(),
            String::new(),
            "false".into(),
            "false".into(),
            "false".into(),
        ])?;
        for m in &r.methods {
            w.write_record([
                r.rep.to_string(),
                m.label.clone(),
                opt(m.test_mspe),
                opt(m.validation_mspe),
                m.n_trees.to_string(),
                join(&m.selected),
                join(&m.weights),
                m.failed.to_string(),
                m.fallback.to_string(),
                m.weight_zeroed.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a records CSV written by [`write_records_csv`]. Wall times and error
/// messages are not stored there and come back empty.
pub fn read_records_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let ingest = |message: String| Error::Ingestion {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| ingest(e.to_string()))?;
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if header != RECORD_HEADER {
        return Err(ingest(format!("unexpected header {header:?}")));
    }
    let mut records: Vec<RunRecord> = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let bad = |what: &str| ingest(format!("row {}: bad {what}", line + 2));
        let num = |i: usize, what: &str| -> Result<Option<f64>> {
            if row[i].is_empty() {
                Ok(None)
            } else {
                row[i].parse().map(Some).map_err(|_| bad(what))
            }
        };
        let rep: usize = row[0].parse().map_err(|_| bad("rep"))?;
        let n_trees: usize = row[4].parse().map_err(|_| bad("n_trees"))?;
        if row[1] == *FULL {
            records.push(RunRecord {
                rep,
                full_forest_test_mspe: num(2, "test_mspe")?.ok_or_else(|| bad("test_mspe"))?,
                full_forest_trees: n_trees,
                methods: Vec::new(),
            });
            continue;
        }
        let rec = records
            .last_mut()
            .filter(|r| r.rep == rep)
            .ok_or_else(|| bad("ordering (method row before its FULL row)"))?;
        let list = |i: usize, what: &str| -> Result<Vec<String>> {
            Ok(if row[i].is_empty() {
                Vec::new()
            } else {
                row[i].split(';').map(String::from).collect()
            })
            .and_then(|v: Vec<String>| {
                if v.iter().any(|s| s.is_empty()) {
                    Err(bad(what))
                } else {
                    Ok(v)
                }
            })
        };
        let flag = |i: usize, what: &str| -> Result<bool> { row[i].parse().map_err(|_| bad(what)) };
        let failed = flag(7, "failed")?;
        rec.methods.push(MethodOutcome {
            label: row[1].to_string(),
            test_mspe: num(2, "test_mspe")?,
            validation_mspe: num(3, "validation_mspe")?,
            n_trees,
            selected: list(5, "selected")?
                .iter()
                .map(|s| s.parse().map_err(|_| bad("selected")))
                .collect::<Result<_>>()?,
            weights: list(6, "weights")?
                .iter()
                .map(|s| s.parse().map_err(|_| bad("weights")))
                .collect::<Result<_>>()?,
            wall_time_s: 0.0,
            failed,
            error: None,
            fallback: flag(8, "fallback")?,
            weight_zeroed: flag(9, "weight_zeroed")?,
        });
    }
    if records.is_empty() {
        return Err(ingest("no records".into()));
    }
    Ok(records)
}

fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

pub fn write_summary_csv<W: Write>(reports: &[ComparisonReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "method",
        "baseline",
        "reps",
        "mean_mspe",
        "baseline_mean_mspe",
        "mspe_delta_pct",
        "p_value",
        "freq_delta_leq_0",
        "mean_trees",
        "baseline_mean_trees",
        "trees_delta_pct",
        "trees_p_value",
        "significant",
    ])?;
    for r in reports {
        w.write_record([
            r.method.clone(),
            r.baseline.clone(),
            r.reps.to_string(),
            fmt6(r.mean_mspe),
            fmt6(r.baseline_mean_mspe),
            fmt6(r.mspe_delta_pct),
            fmt6(r.p_value),
            fmt6(r.freq_delta_leq_0),
            fmt6(r.mean_trees),
            fmt6(r.baseline_mean_trees),
            fmt6(r.trees_delta_pct),
            fmt6(r.trees_p_value),
            r.significant.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timings_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rep", "method", "wall_time_s"])?;
    for r in records {
        for m in &r.methods {
            w.write_record([r.rep.to_string(), m.label.clone(), m.wall_time_s.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub software: &'static str,
    pub version: &'static str,
    pub rng: &'static str,
    pub config: &'a ExperimentConfig,
    /// `(data, split, forest, cv)` seeds for every repetition.
    pub rep_seeds: Vec<[u64; 4]>,
}

pub fn manifest(config: &ExperimentConfig) -> Manifest<'_> {
    let m = config.master_seed;
    Manifest {
        software: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        rng: "xoshiro256++ (SplitMix64 seeding, Box-Muller normals)",
        config,
        rep_seeds: (0..config.reps as u64)
            .map(|r| {
                [
                    derive_seed(m, Stream::Data, r),
                    derive_seed(m, Stream::Split, r),
                    derive_seed(m, Stream::Forest, r),
                    derive_seed(m, Stream::CrossValidation, r),
                ]
            })
            .collect(),
    }
}

/// Writes `records.csv`, `summary.csv` (every method against `FULL`),
/// `pairwise.csv` (every method against every method), `manifest.json` and
/// `timings.csv`. All but the last are deterministic for a given config.
pub fn write_outputs(dir: &Path, config: &ExperimentConfig, records: &[RunRecord]) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_records_csv(records, fs::File::create(dir.join("records.csv"))?)?;
    write_summary_csv(
        &summarize(records, &[FULL.to_string()])?,
        fs::File::create(dir.join("summary.csv"))?,
    )?;
    let labels = method_labels(records);
    write_summary_csv(
        &summarize(records, &labels)?,
        fs::File::create(dir.join("pairwise.csv"))?,
    )?;
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest(config))? + "\n",
    )?;
    write_timings_csv(records, fs::File::create(dir.join("timings.csv"))?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(reps: usize, b: usize) -> ExperimentConfig {
        ExperimentConfig {
            reps,
            forest_size: b,
            ..ExperimentConfig::scenario(ScenarioConfig::new(300, 2, 0.5, 11))
        }
    }

    #[test]
    fn single_tree_forest_makes_every_method_agree() {
        let config = small(1, 1);
        let records = run_experiment(&config).unwrap();
        let r = &records[0];
        for m in &r.methods {
            assert!(!m.failed, "{} failed: {:?}", m.label, m.error);
            assert_eq!(m.selected, vec![0]);
            if !m.label.starts_with("LASSO") {
                assert_eq!(m.test_mspe, Some(r.full_forest_test_mspe));
            }
        }
    }

    #[test]
    fn deterministic_records() {
        let config = small(2, 6);
        let a = run_experiment(&config).unwrap();
        let b = run_experiment(&config).unwrap();
        let mut x = Vec::new();
        let mut y = Vec::new();
        write_records_csv(&a, &mut x).unwrap();
        write_records_csv(&b, &mut y).unwrap();
        assert_eq!(x, y);
        assert_eq!(a.len(), 2);
        assert_eq!(a[0].methods.len(), 5);
        assert_eq!(
            a[0].methods.iter().map(|m| m.label.as_str()).collect::<Vec<_>>(),
            ["SFS", "SBS'", "BSF", "LASSO", "LASSO4"]
        );
    }

    #[test]
    fn records_csv_round_trip() {
        let config = small(2, 4);
        let records = run_experiment(&config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        write_records_csv(&records, fs::File::create(&path).unwrap()).unwrap();
        let back = read_records_csv(&path).unwrap();
        let strip = |rs: &[RunRecord]| {
            let mut rs = rs.to_vec();
            rs.iter_mut().flat_map(|r| r.methods.iter_mut()).for_each(|m| {
                m.wall_time_s = 0.0;
                m.error = None;
            });
            rs
        };
        assert_eq!(strip(&records), back);
    }

    fn fake(rep: usize, full: f64, m: f64, trees: usize) -> RunRecord {
        RunRecord {
            rep,
            full_forest_test_mspe: full,
            full_forest_trees: 25,
            methods: vec![MethodOutcome {
                label: "SFS".into(),
                test_mspe: Some(m),
                validation_mspe: Some(m),
                n_trees: trees,
                selected: vec![0],
                weights: vec![1.0],
                wall_time_s: 0.0,
                failed: false,
                error: None,
                fallback: false,
                weight_zeroed: false,
            }],
        }
    }

    #[test]
    fn summary_self_and_dominance() {
        let recs: Vec<RunRecord> = (0..10)
            .map(|i| fake(i, 2.0 + i as f64 * 0.1, 1.0 + i as f64 * 0.05, 5))
            .collect();
        let s = summarize(&recs, &[FULL.to_string(), "SFS".to_string()]).unwrap();
        assert_eq!(s.len(), 2);
        let vs_full = &s[0];
        assert_eq!(vs_full.freq_delta_leq_0, 1.0);
        assert_eq!(vs_full.p_value, 2.0 / 1024.0);
        assert!(vs_full.significant);
        assert_eq!(vs_full.trees_delta_pct, 100.0 * (5.0 / 25.0 - 1.0));
        let own = &s[1];
        assert_eq!(own.mspe_delta_pct, 0.0);
        assert_eq!(own.p_value, 1.0);
        assert_eq!(own.freq_delta_leq_0, 1.0);
        assert!(summarize(&recs, &["NOPE".to_string()]).is_err());
    }

    #[test]
    fn failed_methods_are_kept_and_skipped_in_pairs() {
        let mut recs: Vec<RunRecord> = (0..4).map(|i| fake(i, 2.0, 1.0 + i as f64, 3)).collect();
        recs[1].methods[0].test_mspe = None;
        recs[1].methods[0].failed = true;
        let s = summarize(&recs, &[FULL.to_string()]).unwrap();
        assert_eq!(s[0].reps, 3);
    }

    #[test]
    fn config_parsing_and_validation() {
        let text = r#"{"source": {"scenario": {"n": 600, "relevant_vars": 2, "noise_variance": 0.04}},
                       "reps": 3, "methods": ["sfs", "BSF", "lasso_k", "BSF3"], "k": 2, "max_trees": 3}"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(
            c.resolved_methods().unwrap(),
            vec![
                MethodSpec::Sfs,
                MethodSpec::Bsf { k: 2 },
                MethodSpec::Lasso { max_trees: Some(3) },
                MethodSpec::Bsf { k: 3 }
            ]
        );
        assert!(ExperimentConfig::from_json(r#"{"source": {"scenario": {"n": 6}}}"#).is_err());
        assert!(ExperimentConfig::from_json(&text.replace("\"reps\": 3", "\"reps\": 0")).is_err());
        assert!(ExperimentConfig::from_json(&text.replace("sfs", "ridge")).is_err());
        assert!(ExperimentConfig::from_json(&text.replace("\"k\"", "\"kk\"")).is_err());
    }
}
