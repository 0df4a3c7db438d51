//! Generalization-bound calculators and a simulation that checks them.
//!
//! Each calculator returns the slack added to the empirical (validation) risk.
//! Log-factorials go through `lgamma`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cart::CartParams;
use crate::data::{generate_scenario, split, ScenarioConfig};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, prediction_matrix};
use crate::nnlasso::CvOptions;
use crate::pruning::{prune, subset_predictions, Method, MethodSpec};
use crate::rng::{derive_seed, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundInputs {
    /// Validation sample count.
    pub n: f64,
    /// Forest size.
    pub b: usize,
    pub delta: f64,
    /// Label range `sup Y − inf Y`.
    pub m: f64,
    /// `max(|inf Y|, sup Y)`.
    pub r: f64,
    /// ℓ1 budget of the Lasso weights.
    pub lambda_l1: f64,
    /// BSF subset-size cap.
    pub k: usize,
    pub tau: f64,
    pub sigma: f64,
}

impl Default for BoundInputs {
    fn default() -> Self {
        Self {
            n: 1000.0,
            b: 100,
            delta: 0.05,
            m: 1.0,
            r: 1.0,
            lambda_l1: 1.0,
            k: 4,
            tau: 1.0,
            sigma: 1.0,
        }
    }
}

/// `ln Γ(x)`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// `M²√(ln(1/δ)/2n) + 4rΛM√(2 ln(2B)/n)`.
pub fn lasso_generalization_bound(i: &BoundInputs) -> Result<f64> {
    check_delta(i.delta)?;
    positive("n", i.n)?;
    positive("M", i.m)?;
    positive("r", i.r)?;
    if !(i.lambda_l1 >= 0.0 && i.lambda_l1.is_finite()) {
        return Err(Error::config("lambda_l1 must be >= 0"));
    }
    if i.b == 0 {
        return Err(Error::config("B must be >= 1"));
    }
    let b = i.b as f64;
    Ok(i.m * i.m * ((1.0 / i.delta).ln() / (2.0 * i.n)).sqrt()
        + 4.0 * i.r * i.lambda_l1 * i.m * (2.0 * (2.0 * b).ln() / i.n).sqrt())
}

/// `M²√((K ln B + ln(1/(δ(K−1)!)))/2n)`, for `1 ≤ K ≤ B/2`.
pub fn bsf_bound(i: &BoundInputs) -> Result<f64> {
    check_delta(i.delta)?;
    positive("n", i.n)?;
    positive("M", i.m)?;
    if i.k == 0 || 2 * i.k > i.b {
        return Err(Error::config(format!(
            "BSF bound needs 1 <= K <= B/2; got K={} with B={}",
            i.k, i.b
        )));
    }
    let (k, b) = (i.k as f64, i.b as f64);
    let log_term = k * b.ln() - i.delta.ln() - ln_gamma(k);
    Ok(i.m * i.m * (log_term / (2.0 * i.n)).sqrt())
}

/// `M²√((B/2 · ln B + ln(1/(δ(B/2−1)!)) + ln 2)/2n)`, for even `B`.
pub fn sfs_bound(i: &BoundInputs) -> Result<f64> {
    check_delta(i.delta)?;
    positive("n", i.n)?;
    positive("M", i.m)?;
    if i.b < 2 || i.b % 2 != 0 {
        return Err(Error::config(format!(
            "SFS bound assumes an even forest size B >= 2; got B={} (round B up to the next even number)",
            i.b
        )));
    }
    let b = i.b as f64;
    let half = b / 2.0;
    let log_term = half * b.ln() - i.delta.ln() - ln_gamma(half) + 2f64.ln();
    Ok(i.m * i.m * (log_term / (2.0 * i.n)).sqrt())
}

/// `M√((|H| + ln(1/δ))/2n)`, linear in `|H|`.
pub fn finite_class_bound(cardinality: u64, n: f64, delta: f64, m: f64) -> Result<f64> {
    check_delta(delta)?;
    positive("n", n)?;
    positive("M", m)?;
    if cardinality == 0 {
        return Err(Error::config("hypothesis class cardinality must be >= 1"));
    }
    Ok(m * ((cardinality as f64 + (1.0 / delta).ln()) / (2.0 * n)).sqrt())
}

/// `2τMσ√(2 ln(2B)/n) + 8τ²M²√(2 ln(2B²)/n)`.
pub fn lasso_risk_bound(tau: f64, m: f64, sigma: f64, b: usize, n: f64) -> Result<f64> {
    positive("tau", tau)?;
    positive("M", m)?;
    positive("n", n)?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::config("sigma must be >= 0"));
    }
    if b == 0 {
        return Err(Error::config("B must be >= 1"));
    }
    let b = b as f64;
    Ok(2.0 * tau * m * sigma * (2.0 * (2.0 * b).ln() / n).sqrt()
        + 8.0 * tau * tau * m * m * (2.0 * (2.0 * b * b).ln() / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    User,
    Estimated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub rep: usize,
    pub method: Method,
    pub label: String,
    /// The slack term.
    pub bound_value: f64,
    /// Validation MSPE of the pruned sub-forest.
    pub empirical_risk: f64,
    /// Test MSPE of the pruned sub-forest.
    pub true_risk_estimate: f64,
    pub breach: bool,
    /// `max(0, test − validation) / slack`.
    pub utilization: f64,
    /// `100 · test / slack`: the share of the bound the test risk consumes.
    pub use_pct: f64,
    /// `100 · (test − validation) / validation`.
    pub risk_delta_pct: f64,
    pub m: f64,
    pub m_source: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    pub label: String,
    pub reps: usize,
    pub breach_pct: f64,
    pub use_pct_mean: f64,
    /// Absent with a single repetition.
    pub use_pct_sd: Option<f64>,
    pub risk_delta_pct_mean: f64,
    pub risk_delta_pct_sd: Option<f64>,
    pub utilization_pct_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundSimConfig {
    /// Total sample size, forest size, signal, noise and master seed.
    pub scenario: ScenarioConfig,
    pub methods: Vec<MethodSpec>,
    pub reps: usize,
    pub ratios: [f64; 3],
    pub delta: f64,
    pub cart: CartParams,
    pub subspace_rate: f64,
    /// Label range; estimated from the sample when absent.
    pub m: Option<f64>,
    pub r: Option<f64>,
    pub cv: CvOptions,
}

impl Default for BoundSimConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig {
                forest_size: 100,
                ..ScenarioConfig::new(1000, 2, 2.0, 123)
            },
            methods: vec![
                MethodSpec::Lasso { max_trees: None },
                MethodSpec::Bsf { k: 4 },
                MethodSpec::Sfs,
            ],
            reps: 30,
            ratios: [0.3, 0.35, 0.35],
            delta: 0.05,
            cart: CartParams::default(),
            subspace_rate: 0.8,
            m: None,
            r: None,
            cv: CvOptions::default(),
        }
    }
}

impl BoundSimConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.reps == 0 {
            return Err(Error::config("reps must be >= 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("no methods requested"));
        }
        for m in &self.methods {
            if matches!(m, MethodSpec::SbsPrime) {
                return Err(Error::config(format!(
                    "no generalization bound for {m}; choose from LASSO, BSF, SFS"
                )));
            }
        }
        check_delta(self.delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSimulation {
    pub reports: Vec<BoundReport>,
    pub summary: Vec<BoundSummary>,
}

fn mean_sd(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

/// Repeats: draw a scenario sample, split it, fit a forest on the training
/// part, prune on validation, and compare each method's slack with its
/// test-minus-validation gap.
pub fn simulate_bounds(config: &BoundSimConfig) -> Result<BoundSimulation> {
    config.validate()?;
    let per_rep: Vec<Vec<BoundReport>> = (0..config.reps)
        .into_par_iter()
        .map(|rep| simulate_rep(config, rep))
        .collect::<Result<_>>()?;
    let reports: Vec<BoundReport> = per_rep.into_iter().flatten().collect();

    let summary = config
        .methods
        .iter()
        .map(|spec| {
            let label = spec.to_string();
            let rows: Vec<&BoundReport> = reports.iter().filter(|r| r.label == label).collect();
            let uses: Vec<f64> = rows.iter().map(|r| r.use_pct).collect();
            let deltas: Vec<f64> = rows.iter().map(|r| r.risk_delta_pct).collect();
            let (use_pct_mean, use_pct_sd) = mean_sd(&uses);
            let (risk_delta_pct_mean, risk_delta_pct_sd) = mean_sd(&deltas);
            BoundSummary {
                reps: rows.len(),
                breach_pct: 100.0 * rows.iter().filter(|r| r.breach).count() as f64 / rows.len() as f64,
                use_pct_mean,
                use_pct_sd,
                risk_delta_pct_mean,
                risk_delta_pct_sd,
                utilization_pct_mean: 100.0 * rows.iter().map(|r| r.utilization).sum::<f64>() / rows.len() as f64,
                label,
            }
        })
        .collect();
    Ok(BoundSimulation { reports, summary })
}

fn simulate_rep(config: &BoundSimConfig, rep: usize) -> Result<Vec<BoundReport>> {
    let master = config.scenario.seed;
    let rep = rep as u64;
    let scenario = ScenarioConfig {
        seed: derive_seed(master, Stream::Data, rep),
        ..config.scenario.clone()
    };
    let data = generate_scenario(&scenario)?;
    let parts = split(&data, config.ratios, derive_seed(master, Stream::Split, rep))?;
    let b = scenario.forest_size;
    let forest = fit_forest(
        &data,
        &parts.train,
        b,
        &config.cart,
        config.subspace_rate,
        derive_seed(master, Stream::Forest, rep),
    )?;
    let p_val = prediction_matrix(&forest, &data, &parts.validation)?;
    let p_test = prediction_matrix(&forest, &data, &parts.test)?;
    let y_val = data.responses_at(&parts.validation);
    let y_test = data.responses_at(&parts.test);

    let y = data.response();
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (m, m_source) = match config.m {
        Some(m) => (m, Provenance::User),
        None => (hi - lo, Provenance::Estimated),
    };
    let r = config.r.unwrap_or(lo.abs().max(hi));
    let cv = CvOptions {
        seed: derive_seed(master, Stream::CrossValidation, rep),
        ..config.cv.clone()
    };

    let mut out = Vec::with_capacity(config.methods.len());
    for spec in &config.methods {
        let spec = match *spec {
            MethodSpec::Bsf { k } => MethodSpec::Bsf {
                k: k.min((b / 2).max(1)),
            },
            s => s,
        };
        let result = prune(&p_val, &y_val, spec, &cv)?;
        let inputs = BoundInputs {
            n: parts.validation.len() as f64,
            b,
            delta: config.delta,
            m,
            r,
            lambda_l1: result.weights.iter().sum(),
            k: match spec {
                MethodSpec::Bsf { k } => k,
                _ => 1,
            },
            ..BoundInputs::default()
        };
        let slack = match spec {
            MethodSpec::Lasso { .. } => lasso_generalization_bound(&inputs)?,
            MethodSpec::Bsf { .. } => bsf_bound(&inputs)?,
            MethodSpec::Sfs => sfs_bound(&inputs)?,
            MethodSpec::SbsPrime => unreachable!("rejected by validate"),
        };
        let pred = subset_predictions(&p_test, &result.selected, &result.weights);
        let test = pred.iter().zip(&y_test).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y_test.len() as f64;
        let emp = result.validation_mspe;
        let utilization = ((test - emp) / slack).max(0.0);
        out.push(BoundReport {
            rep: rep as usize,
            method: result.method,
            label: spec.to_string(),
            bound_value: slack,
            empirical_risk: emp,
            true_risk_estimate: test,
            breach: test > emp + slack,
            utilization,
            use_pct: 100.0 * test / slack,
            risk_delta_pct: 100.0 * (test - emp) / emp,
            m,
            m_source,
        });
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl BoundSimulation {
    /// Table layout: method, breach %, use % ± sd, risk Δ% ± sd.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "method",
            "reps",
            "breach_pct",
            "use_pct_mean",
            "use_pct_sd",
            "risk_delta_pct_mean",
            "risk_delta_pct_sd",
            "utilization_pct_mean",
        ])?;
        for s in &self.summary {
            w.write_record([
                s.label.clone(),
                s.reps.to_string(),
                format!("{:.6}", s.breach_pct),
                format!("{:.6}", s.use_pct_mean),
                opt(s.use_pct_sd),
                format!("{:.6}", s.risk_delta_pct_mean),
                opt(s.risk_delta_pct_sd),
                format!("{:.6}", s.utilization_pct_mean),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_reports_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "rep",
            "method",
            "bound_value",
            "empirical_risk",
            "true_risk_estimate",
            "breach",
            "utilization",
            "use_pct",
            "risk_delta_pct",
            "m",
            "m_source",
        ])?;
        for r in &self.reports {
            w.write_record([
                r.rep.to_string(),
                r.label.clone(),
                r.bound_value.to_string(),
                r.empirical_risk.to_string(),
                r.true_risk_estimate.to_string(),
                r.breach.to_string(),
                r.utilization.to_string(),
                r.use_pct.to_string(),
                r.risk_delta_pct.to_string(),
                r.m.to_string(),
                match r.m_source {
                    Provenance::User => "user".into(),
                    Provenance::Estimated => "estimated".to_string(),
                },
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
