//! Non-negative Lasso without intercept:
//!
//! ```text
//! minimise  ||y - Xβ||² + λ Σ_j β_j   subject to β ≥ 0
//! ```
//!
//! The penalty is un-normalised (no `1/2n` factor), so the smallest λ that
//! zeroes every coefficient is `λ_max = 2 max_j (x_jᵀy)⁺`. Users of the
//! `(1/2n)||·||² + α|β|₁` convention should map `λ = 2nα`.
//!
//! The solver is cyclic coordinate descent on the Gram form `G = XᵀX`,
//! `c = Xᵀy`, alternating sweeps over the active set with full sweeps until a
//! full sweep moves no coefficient by more than `tol`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, ColMatrix};
use crate::rng::{derive_seed, SeededRng, Stream};

pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnLassoFit {
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    /// `||y - Xβ||² + λΣβ`, recomputed from the residual.
    pub objective: f64,
    /// Number of coordinate sweeps performed.
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every sweep (Gram form).
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

impl NnLassoFit {
    pub fn nonzero_count(&self) -> usize {
        self.coefficients.iter().filter(|&&b| b > 0.0).count()
    }
}

/// Sufficient statistics of a least-squares problem.
#[derive(Debug, Clone)]
pub(crate) struct Gram {
    pub p: usize,
    /// Row-major `XᵀX`.
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    pub yty: f64,
}

impl Gram {
    pub fn new(x: &ColMatrix, y: &[f64]) -> Self {
        Self {
            p: x.ncols(),
            g: x.gram(),
            c: x.t_mul_vec(y),
            yty: dot(y, y),
        }
    }

    fn minus(&self, other: &Gram) -> Gram {
        Gram {
            p: self.p,
            g: self.g.iter().zip(&other.g).map(|(a, b)| a - b).collect(),
            c: self.c.iter().zip(&other.c).map(|(a, b)| a - b).collect(),
            yty: self.yty - other.yty,
        }
    }

    /// `||y - Xβ||²` evaluated from the Gram form, clamped at zero.
    pub fn rss(&self, beta: &[f64]) -> f64 {
        let q = self.mul(beta);
        (self.yty - 2.0 * dot(&self.c, beta) + dot(beta, &q)).max(0.0)
    }

    fn mul(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.p)
            .map(|j| dot(&self.g[j * self.p..(j + 1) * self.p], beta))
            .collect()
    }

    fn objective(&self, beta: &[f64], q: &[f64], lambda: f64) -> f64 {
        self.yty - 2.0 * dot(&self.c, beta) + dot(beta, q) + lambda * beta.iter().sum::<f64>()
    }

    /// Scale used by the KKT tolerance: `2 max_j Σ_k |G_jk|`.
    pub fn kkt_scale(&self) -> f64 {
        let s = (0..self.p)
            .map(|j| {
                self.g[j * self.p..(j + 1) * self.p]
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        2.0 * s
    }
}

pub(crate) struct Solution {
    pub beta: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

pub(crate) fn solve_gram(gram: &Gram, lambda: f64, init: Option<&[f64]>, tol: f64, max_iter: usize) -> Solution {
    let p = gram.p;
    let g = &gram.g;
    let usable: Vec<bool> = (0..p).map(|j| g[j * p + j] > 0.0).collect();
    let mut beta: Vec<f64> = match init {
        Some(b) => b
            .iter()
            .zip(&usable)
            .map(|(&v, &u)| if u { v.max(0.0) } else { 0.0 })
            .collect(),
        None => vec![0.0; p],
    };
    let mut q = gram.mul(&beta);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let half = 0.5 * lambda;

    let sweep = |beta: &mut Vec<f64>, q: &mut Vec<f64>, coords: &[usize]| -> f64 {
        let mut max_delta: f64 = 0.0;
        for &j in coords {
            let gjj = g[j * p + j];
            let old = beta[j];
            let rho = gram.c[j] - (q[j] - gjj * old);
            let new = ((rho - half) / gjj).max(0.0);
            let delta = new - old;
            if delta != 0.0 {
                beta[j] = new;
                for (qk, gk) in q.iter_mut().zip(&g[j * p..(j + 1) * p]) {
                    *qk += delta * gk;
                }
                max_delta = max_delta.max(delta.abs());
            }
        }
        max_delta
    };

    let all: Vec<usize> = (0..p).filter(|&j| usable[j]).collect();
    let mut converged = false;
    while iterations < max_iter {
        let full_delta = sweep(&mut beta, &mut q, &all);
        iterations += 1;
        q = gram.mul(&beta);
        trace.push(gram.objective(&beta, &q, lambda));
        if full_delta < tol {
            converged = true;
            break;
        }
        let active: Vec<usize> = all.iter().copied().filter(|&j| beta[j] > 0.0).collect();
        while iterations < max_iter {
            let d = sweep(&mut beta, &mut q, &active);
            iterations += 1;
            trace.push(gram.objective(&beta, &q, lambda));
            if d < tol {
                break;
            }
        }
    }
    Solution {
        beta,
        iterations,
        converged,
        trace,
    }
}

fn check_problem(x: &ColMatrix, y: &[f64], lambda: f64) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::invalid("design matrix has no rows"));
    }
    if y.len() != x.nrows() {
        return Err(Error::invalid(format!(
            "response has {} entries for a design with {} rows",
            y.len(),
            x.nrows()
        )));
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("design and response must be finite"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::config(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(())
}

pub fn fit_nnlasso(
    x: &ColMatrix,
    y: &[f64],
    lambda: f64,
    init: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<NnLassoFit> {
    check_problem(x, y, lambda)?;
    if init.is_some_and(|b| b.len() != x.ncols()) {
        return Err(Error::invalid("initial coefficients have the wrong length"));
    }
    let gram = Gram::new(x, y);
    let sol = solve_gram(&gram, lambda, init, tol, max_iter);
    Ok(finish(x, y, lambda, sol))
}

fn finish(x: &ColMatrix, y: &[f64], lambda: f64, sol: Solution) -> NnLassoFit {
    let fitted = x.mul_vec(&sol.beta);
    let rss: f64 = fitted.iter().zip(y).map(|(f, v)| (v - f) * (v - f)).sum();
    if !sol.converged {
        log::warn!("non-negative lasso hit max_iter={} at lambda={lambda}", sol.iterations);
    }
    NnLassoFit {
        objective: rss + lambda * sol.beta.iter().sum::<f64>(),
        coefficients: sol.beta,
        lambda,
        iterations: sol.iterations,
        converged: sol.converged,
        objective_trace: sol.trace,
    }
}

/// Largest KKT violation of `beta`, in absolute gradient units.
///
/// With `g_j = 2x_jᵀ(Xβ - y) + λ`: active coordinates need `g_j = 0`,
/// inactive ones `g_j ≥ 0`.
pub fn kkt_violation(x: &ColMatrix, y: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let gram = Gram::new(x, y);
    kkt_violation_gram(&gram, beta, lambda)
}

pub(crate) fn kkt_violation_gram(gram: &Gram, beta: &[f64], lambda: f64) -> f64 {
    let q = gram.mul(beta);
    (0..gram.p)
        .map(|j| {
            if gram.g[j * gram.p + j] <= 0.0 {
                return 0.0;
            }
            let grad = 2.0 * (q[j] - gram.c[j]) + lambda;
            if beta[j] > 0.0 {
                grad.abs()
            } else {
                (-grad).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// KKT tolerance `10 · tol · 2 max_j Σ_k |G_jk|`.
pub fn kkt_tolerance(x: &ColMatrix, tol: f64) -> f64 {
    let gram = Gram::new(x, &vec![0.0; x.nrows()]);
    10.0 * tol * gram.kkt_scale()
}

pub fn lambda_max(x: &ColMatrix, y: &[f64]) -> f64 {
    lambda_max_from(&x.t_mul_vec(y))
}

fn lambda_max_from(c: &[f64]) -> f64 {
    let m = c.iter().copied().fold(0.0, f64::max);
    if m > 0.0 {
        2.0 * m
    } else {
        log::warn!("no column correlates positively with the response; using lambda_max = 1");
        1.0
    }
}

/// Descending log-spaced grid from `λ_max` to `min_ratio · λ_max`.
pub fn lambda_grid(x: &ColMatrix, y: &[f64], count: usize, min_ratio: f64) -> Result<Vec<f64>> {
    check_problem(x, y, 0.0)?;
    grid_from(lambda_max(x, y), count, min_ratio)
}

fn grid_from(lmax: f64, count: usize, min_ratio: f64) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::config("lambda grid needs at least one value"));
    }
    if !(min_ratio > 0.0 && min_ratio <= 1.0) {
        return Err(Error::config(format!("min_ratio must lie in (0, 1], got {min_ratio}")));
    }
    if count == 1 || min_ratio == 1.0 {
        return Ok(vec![lmax]);
    }
    let step = min_ratio.ln() / (count - 1) as f64;
    Ok((0..count).map(|k| lmax * (step * k as f64).exp()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// λ with the smallest mean held-out error.
    Min,
    /// Largest λ within one standard error of the minimum.
    OneSe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
    pub count: usize,
    pub min_ratio: f64,
    pub rule: SelectionRule,
    /// Rescale columns to unit root-mean-square before fitting. Coefficients
    /// are mapped back to the original scale.
    pub standardize: bool,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            folds: 10,
            seed: 123,
            count: 100,
            min_ratio: 1e-3,
            rule: SelectionRule::Min,
            standardize: false,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPath {
    pub lambdas: Vec<f64>,
    /// Fits on the full data, coefficients on the original column scale.
    pub fits: Vec<NnLassoFit>,
    pub cv_mean: Vec<f64>,
    pub cv_se: Vec<f64>,
    pub selected: usize,
}

impl LambdaPath {
    pub fn selected_fit(&self) -> &NnLassoFit {
        &self.fits[self.selected]
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lambda", "cv_mean", "cv_se", "nonzero_count"])?;
        for i in 0..self.lambdas.len() {
            w.write_record([
                self.lambdas[i].to_string(),
                self.cv_mean[i].to_string(),
                self.cv_se[i].to_string(),
                self.fits[i].nonzero_count().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Deterministic fold labels: a seeded shuffle, then position modulo `folds`.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    SeededRng::new(derive_seed(seed, Stream::CrossValidation, 0)).shuffle(&mut perm);
    let mut fold = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

/// K-fold cross-validation over a descending λ grid with warm starts.
pub fn cv_select_lambda(x: &ColMatrix, y: &[f64], options: &CvOptions) -> Result<(f64, LambdaPath)> {
    check_problem(x, y, 0.0)?;
    let n = x.nrows();
    let k = options.folds;
    if k < 2 {
        return Err(Error::config("cross-validation needs at least 2 folds"));
    }
    if n < k {
        return Err(Error::config(format!(
            "cross-validation with {k} folds needs at least {k} rows, got {n}"
        )));
    }

    let scales: Vec<f64> = (0..x.ncols())
        .map(|j| {
            let rms = (dot(x.col(j), x.col(j)) / n as f64).sqrt();
            if options.standardize && rms > 0.0 {
                rms
            } else {
                1.0
            }
        })
        .collect();
    let design = if options.standardize {
        let mut d = x.clone();
        for (j, &s) in scales.iter().enumerate() {
            d.col_mut(j).iter_mut().for_each(|v| *v /= s);
        }
        d
    } else {
        x.clone()
    };

    let full = Gram::new(&design, y);
    let lambdas = grid_from(lambda_max_from(&full.c), options.count, options.min_ratio)?;

    let fold = fold_assignment(n, k, options.seed);
    let mut errors = vec![vec![0.0; lambdas.len()]; k];
    for (f, errs) in errors.iter_mut().enumerate() {
        let held: Vec<usize> = (0..n).filter(|&i| fold[i] == f).collect();
        let held_gram = Gram::new(
            &design.select_rows(&held),
            &held.iter().map(|&i| y[i]).collect::<Vec<_>>(),
        );
        let train = full.minus(&held_gram);
        let mut beta: Option<Vec<f64>> = None;
        for (l, &lambda) in lambdas.iter().enumerate() {
            let sol = solve_gram(&train, lambda, beta.as_deref(), options.tol, options.max_iter);
            errs[l] = held_gram.rss(&sol.beta) / held.len() as f64;
            beta = Some(sol.beta);
        }
    }
    let cv_mean: Vec<f64> = (0..lambdas.len())
        .map(|l| errors.iter().map(|e| e[l]).sum::<f64>() / k as f64)
        .collect();
    let cv_se: Vec<f64> = (0..lambdas.len())
        .map(|l| {
            let m = cv_mean[l];
            let var = errors.iter().map(|e| (e[l] - m).powi(2)).sum::<f64>() / (k - 1) as f64;
            (var / k as f64).sqrt()
        })
        .collect();

    let mut best = 0;
    for l in 1..lambdas.len() {
        if cv_mean[l] < cv_mean[best] {
            best = l;
        }
    }
    let selected = match options.rule {
        SelectionRule::Min => best,
        SelectionRule::OneSe => {
            let limit = cv_mean[best] + cv_se[best];
            (0..=best).find(|&l| cv_mean[l] <= limit).unwrap_or(best)
        }
    };

    let mut fits = Vec::with_capacity(lambdas.len());
    let mut beta: Option<Vec<f64>> = None;
    for &lambda in &lambdas {
        let sol = solve_gram(&full, lambda, beta.as_deref(), options.tol, options.max_iter);
        beta = Some(sol.beta.clone());
        let mut fit = finish(&design, y, lambda, sol);
        if options.standardize {
            for (b, s) in fit.coefficients.iter_mut().zip(&scales) {
                *b /= s;
            }
        }
        fits.push(fit);
    }

    let lambda = lambdas[selected];
    Ok((
        lambda,
        LambdaPath {
            lambdas,
            fits,
            cv_mean,
            cv_se,
            selected,
        },
    ))
}
