//! Datasets: synthetic scenario generation, CSV ingestion and seeded
//! train/validation/test partitioning.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Dense feature matrix (row-major) with a numeric response.
///
/// Immutable after construction; every constructor rejects non-finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
    response: Vec<f64>,
    column_names: Vec<String>,
}

impl Dataset {
    pub fn new(features: Vec<f64>, n_cols: usize, response: Vec<f64>, column_names: Vec<String>) -> Result<Self> {
        let n_rows = response.len();
        if features.len() != n_rows * n_cols {
            return Err(Error::invalid(format!(
                "feature matrix has {} values, expected {n_rows} rows x {n_cols} columns",
                features.len()
            )));
        }
        if column_names.len() != n_cols {
            return Err(Error::invalid(format!(
                "{} column names for {n_cols} columns",
                column_names.len()
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite feature at row {}, column {}",
                pos / n_cols.max(1),
                column_names[pos % n_cols.max(1)]
            )));
        }
        if let Some(row) = response.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite response at row {row}")));
        }
        Ok(Self {
            features,
            n_rows,
            n_cols,
            response,
            column_names,
        })
    }

    /// Builds a dataset with generated column names `x1..xd`.
    pub fn from_rows(rows: &[Vec<f64>], response: Vec<f64>) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.len() != response.len() {
            return Err(Error::invalid(format!(
                "{} feature rows but {} responses",
                rows.len(),
                response.len()
            )));
        }
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::invalid("ragged feature rows"));
        }
        let features = rows.iter().flatten().copied().collect();
        Self::new(features, n_cols, response, default_names(n_cols))
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.features[row * self.n_cols + col]
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// Responses of the listed rows, in order.
    pub fn responses_at(&self, rows: &[usize]) -> Vec<f64> {
        rows.iter().map(|&i| self.response[i]).collect()
    }

    /// Writes the feature columns followed by the response as a headed CSV
    /// that [`load_csv`] reads back exactly.
    pub fn write_csv<W: std::io::Write>(&self, response_name: &str, out: W) -> Result<()> {
        if self.column_names.iter().any(|c| c == response_name) {
            return Err(Error::invalid(format!(
                "response name '{response_name}' clashes with a feature"
            )));
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.column_names.iter().map(String::as_str).chain([response_name]))?;
        for i in 0..self.n_rows {
            w.write_record(self.row(i).iter().chain([&self.response[i]]).map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub(crate) fn check_indices(&self, rows: &[usize]) -> Result<()> {
        match rows.iter().find(|&&i| i >= self.n_rows) {
            Some(i) => Err(Error::invalid(format!(
                "row index {i} out of range for {} rows",
                self.n_rows
            ))),
            None => Ok(()),
        }
    }
}

fn default_names(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

/// Synthetic regression scenario: `y = x_1 + … + x_k + ε` with i.i.d.
/// standard normal predictors and `ε ~ N(0, σ²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: usize,
    pub relevant_vars: usize,
    #[serde(default = "default_total_vars")]
    pub total_vars: usize,
    /// Forest size used by pipelines that take their B from the scenario.
    #[serde(default = "default_forest_size")]
    pub forest_size: usize,
    pub noise_variance: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_total_vars() -> usize {
    10
}

fn default_forest_size() -> usize {
    25
}

fn default_seed() -> u64 {
    123
}

impl ScenarioConfig {
    pub fn new(n: usize, relevant_vars: usize, noise_variance: f64, seed: u64) -> Self {
        Self {
            n,
            relevant_vars,
            total_vars: default_total_vars(),
            forest_size: default_forest_size(),
            noise_variance,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("scenario needs n >= 1"));
        }
        if self.total_vars == 0 {
            return Err(Error::config("scenario needs at least one predictor"));
        }
        if self.relevant_vars > self.total_vars {
            return Err(Error::config(format!(
                "relevant_vars ({}) exceeds total_vars ({})",
                self.relevant_vars, self.total_vars
            )));
        }
        // σ² = 0 is accepted for noiseless checks.
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::config(format!(
                "noise_variance must be finite and non-negative, got {}",
                self.noise_variance
            )));
        }
        if self.forest_size == 0 {
            return Err(Error::config("forest_size must be >= 1"));
        }
        Ok(())
    }
}

/// Draws a scenario dataset. Row by row: `total_vars` predictor normals, then
/// one noise normal, all from a single stream seeded with `config.seed`.
pub fn generate_scenario(config: &ScenarioConfig) -> Result<Dataset> {
    config.validate()?;
    let d = config.total_vars;
    let sigma = config.noise_variance.sqrt();
    let mut rng = SeededRng::new(config.seed);
    let mut features = Vec::with_capacity(config.n * d);
    let mut response = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let start = features.len();
        features.extend((0..d).map(|_| rng.normal()));
        let signal: f64 = features[start..start + config.relevant_vars].iter().sum();
        let noise = rng.normal();
        response.push(signal + sigma * noise);
    }
    Dataset::new(features, d, response, default_names(d))
}

/// How non-numeric CSV columns are encoded.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvOptions {
    /// Columns encoded as integer codes `0..levels.len()` in the declared
    /// order. All other non-numeric columns are one-hot encoded.
    #[serde(default)]
    pub ordinal: BTreeMap<String, Vec<String>>,
}

enum ColumnKind {
    Numeric(Vec<f64>),
    Ordinal(Vec<f64>),
    Categorical(Vec<String>),
}

/// Reads a headed CSV file. Numeric and ordinal columns keep their order;
/// categorical columns become indicator columns `name=level` (levels sorted)
/// appended after them.
pub fn load_csv(path: &Path, response_column: &str, options: &CsvOptions) -> Result<Dataset> {
    let ingest = |message: String| Error::Ingestion {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| ingest(e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| ingest(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let response_idx = headers
        .iter()
        .position(|h| h == response_column)
        .ok_or_else(|| ingest(format!("response column {response_column:?} not found")))?;
    for name in options.ordinal.keys() {
        if !headers.contains(name) {
            return Err(ingest(format!("ordinal column {name:?} not found")));
        }
    }

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| ingest(e.to_string()))?;
        for (col, cell) in record.iter().enumerate() {
            if cell.trim().is_empty() {
                return Err(ingest(format!(
                    "empty cell at row {}, column {:?}",
                    row + 1,
                    headers[col]
                )));
            }
            cells[col].push(cell.to_owned());
        }
    }
    let n_rows = cells[response_idx].len();

    let parse_numeric = |col: usize| -> Option<Result<Vec<f64>>> {
        let mut out = Vec::with_capacity(n_rows);
        for (row, cell) in cells[col].iter().enumerate() {
            match cell.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => out.push(v),
                Ok(_) => {
                    return Some(Err(ingest(format!(
                        "non-finite value {cell:?} at row {}, column {:?}",
                        row + 1,
                        headers[col]
                    ))))
                }
                Err(_) => return None,
            }
        }
        Some(Ok(out))
    };

    let response = match parse_numeric(response_idx) {
        Some(r) => r?,
        None => {
            let row = cells[response_idx]
                .iter()
                .position(|c| c.trim().parse::<f64>().is_err())
                .unwrap_or(0);
            return Err(ingest(format!(
                "response column {response_column:?} is not numeric (row {}: {:?})",
                row + 1,
                cells[response_idx][row]
            )));
        }
    };

    let mut kinds = Vec::new();
    for (col, name) in headers.iter().enumerate() {
        if col == response_idx {
            continue;
        }
        let kind = if let Some(levels) = options.ordinal.get(name) {
            let mut codes = Vec::with_capacity(n_rows);
            for (row, cell) in cells[col].iter().enumerate() {
                let code = levels.iter().position(|l| l == cell).ok_or_else(|| {
                    ingest(format!(
                        "level {cell:?} at row {}, column {name:?} is not in the declared ordinal levels",
                        row + 1
                    ))
                })?;
                codes.push(code as f64);
            }
            ColumnKind::Ordinal(codes)
        } else {
            match parse_numeric(col) {
                Some(values) => ColumnKind::Numeric(values?),
                None => ColumnKind::Categorical(cells[col].clone()),
            }
        };
        kinds.push((name.clone(), kind));
    }

    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    let mut indicator_columns = Vec::new();
    for (name, kind) in kinds {
        match kind {
            ColumnKind::Numeric(v) | ColumnKind::Ordinal(v) => columns.push((name, v)),
            ColumnKind::Categorical(raw) => {
                let levels: BTreeSet<&String> = raw.iter().collect();
                for level in levels {
                    let ind = raw.iter().map(|c| f64::from(u8::from(c == level))).collect();
                    indicator_columns.push((format!("{name}={level}"), ind));
                }
            }
        }
    }
    columns.extend(indicator_columns);

    let n_cols = columns.len();
    let mut features = vec![0.0; n_rows * n_cols];
    for (j, (_, values)) in columns.iter().enumerate() {
        for (i, v) in values.iter().enumerate() {
            features[i * n_cols + j] = *v;
        }
    }
    let names = columns.into_iter().map(|(n, _)| n).collect();
    Dataset::new(features, n_cols, response, names)
}

/// Row indices of a three-way partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    /// Training followed by validation rows.
    pub fn train_and_validation(&self) -> Vec<usize> {
        let mut rows = self.train.clone();
        rows.extend_from_slice(&self.validation);
        rows
    }
}

/// Sizes for `n` rows: floor of each share, then the remainder handed out
/// one row at a time to train, validation, test.
pub fn split_sizes(n: usize, ratios: [f64; 3]) -> Result<[usize; 3]> {
    validate_ratios(ratios)?;
    let mut sizes = ratios.map(|r| (r * n as f64).floor() as usize);
    let mut remainder = n - sizes.iter().sum::<usize>().min(n);
    let mut slot = 0;
    while remainder > 0 {
        sizes[slot % 3] += 1;
        remainder -= 1;
        slot += 1;
    }
    Ok(sizes)
}

fn validate_ratios(ratios: [f64; 3]) -> Result<()> {
    if ratios.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
        return Err(Error::config(format!(
            "split ratios must each lie in (0, 1), got {ratios:?}"
        )));
    }
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("split ratios must sum to 1, got {total}")));
    }
    Ok(())
}

/// Uniformly random partition of the dataset rows, deterministic per seed.
/// Each part is returned in ascending row order.
pub fn split(dataset: &Dataset, ratios: [f64; 3], seed: u64) -> Result<SplitIndices> {
    split_rows(dataset.n_rows(), ratios, seed)
}

pub fn split_rows(n: usize, ratios: [f64; 3], seed: u64) -> Result<SplitIndices> {
    let [n_train, n_val, _] = split_sizes(n, ratios)?;
    let mut perm: Vec<usize> = (0..n).collect();
    SeededRng::new(seed).shuffle(&mut perm);
    let mut train = perm[..n_train].to_vec();
    let mut validation = perm[n_train..n_train + n_val].to_vec();
    let mut test = perm[n_train + n_val..].to_vec();
    train.sort_unstable();
    validation.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices {
        train,
        validation,
        test,
    })
}
