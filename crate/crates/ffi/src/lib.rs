//! C ABI over `forestprune`.
//!
//! Objects cross the boundary as opaque heap handles that the caller frees
//! with the matching `fp_*_free`. Every fallible call returns an [`FpStatus`];
//! on failure, [`fp_last_error_message`] describes what went wrong on the
//! calling thread. Panics never unwind into C: they are caught and reported
//! as [`FpStatus::Panic`].
//!
//! Strings returned through `char **` out-parameters are owned by the caller
//! and must be released with [`fp_string_free`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use forestprune::bounds::{
    bsf_bound, finite_class_bound, lasso_generalization_bound, lasso_risk_bound, sfs_bound, BoundInputs,
};
use forestprune::cart::CartParams;
use forestprune::data::{generate_scenario, load_csv, CsvOptions, Dataset, ScenarioConfig};
use forestprune::forest::{fit_forest, predict_forest, prediction_matrix, Forest};
use forestprune::merge::merge_selection;
use forestprune::nnlasso::CvOptions;
use forestprune::pruning::{prune, MethodSpec, PruneResult};
use forestprune::Error;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Config = 5,
    Internal = 6,
    Panic = 7,
}

/// A feature matrix with its response.
pub struct FpDataset {
    inner: Dataset,
}

/// A fitted forest.
pub struct FpForest {
    inner: Forest,
}

/// The outcome of pruning a forest.
pub struct FpPruneResult {
    inner: PruneResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(FpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Config(_) => FpStatus::Config,
            Error::InvalidInput(_) | Error::LeafBudget { .. } => FpStatus::InvalidArgument,
            Error::Io(_) => FpStatus::Io,
            Error::Ingestion { .. } | Error::Json(_) | Error::Csv(_) => FpStatus::Parse,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(FpStatus::NullPointer, format!("{what} is NULL"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(FpStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status plus a message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FpStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {msg}"));
            FpStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    let c = CString::new(s).map_err(|_| Failure(FpStatus::Internal, "string contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn put_f64(out: *mut f64, v: forestprune::Result<f64>) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = v?;
    Ok(())
}

unsafe fn copy_out<T: Copy>(src: &[T], out: *mut T, len: usize) -> Result<(), Failure> {
    if len != src.len() {
        return Err(invalid(format!("output buffer holds {len} values, need {}", src.len())));
    }
    if out.is_null() && len > 0 {
        return Err(null("output buffer"));
    }
    if len > 0 {
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(src);
    }
    Ok(())
}

/// Message for the last failed call on this thread, or NULL if none failed.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub unsafe extern "C" fn fp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---- datasets ----

/// Builds a dataset from a row-major `n_rows × n_cols` feature array.
/// Columns are named `x1..x{n_cols}`.
#[no_mangle]
pub unsafe extern "C" fn fp_dataset_from_rows(
    features: *const f64,
    n_rows: usize,
    n_cols: usize,
    response: *const f64,
    out: *mut *mut FpDataset,
) -> FpStatus {
    guard(|| {
        let len = n_rows
            .checked_mul(n_cols)
            .ok_or_else(|| invalid("n_rows * n_cols overflows"))?;
        let x = slice(features, len, "features")?.to_vec();
        let y = slice(response, n_rows, "response")?.to_vec();
        let names = (1..=n_cols).map(|j| format!("x{j}")).collect();
        put(
            out,
            FpDataset {
                inner: Dataset::new(x, n_cols, y, names)?,
            },
        )
    })
}

/// Loads a headed CSV file; non-numeric columns are one-hot encoded.
#[no_mangle]
pub unsafe extern "C" fn fp_dataset_load_csv(
    path: *const c_char,
    response_column: *const c_char,
    out: *mut *mut FpDataset,
) -> FpStatus {
    guard(|| {
        let path = text(path, "path")?;
        let col = text(response_column, "response_column")?;
        put(
            out,
            FpDataset {
                inner: load_csv(Path::new(path), col, &CsvOptions::default())?,
            },
        )
    })
}

/// Draws the synthetic scenario `y = x_1 + … + x_k + ε` with ten predictors.
#[no_mangle]
pub unsafe extern "C" fn fp_dataset_generate(
    n: usize,
    relevant_vars: usize,
    noise_variance: f64,
    seed: u64,
    out: *mut *mut FpDataset,
) -> FpStatus {
    guard(|| {
        let ds = generate_scenario(&ScenarioConfig::new(n, relevant_vars, noise_variance, seed))?;
        put(out, FpDataset { inner: ds })
    })
}

/// Row count, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn fp_dataset_n_rows(ds: *const FpDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.n_rows())
}

/// Feature count, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn fp_dataset_n_cols(ds: *const FpDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.n_cols())
}

#[no_mangle]
pub unsafe extern "C" fn fp_dataset_free(ds: *mut FpDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

// ---- forests ----

/// Fits `n_trees` bootstrap CART trees with default stopping rules on every
/// row of `ds`.
#[no_mangle]
pub unsafe extern "C" fn fp_forest_fit(
    ds: *const FpDataset,
    n_trees: usize,
    subspace_rate: f64,
    seed: u64,
    out: *mut *mut FpForest,
) -> FpStatus {
    guard(|| {
        let ds = &borrow(ds, "dataset")?.inner;
        let rows: Vec<usize> = (0..ds.n_rows()).collect();
        let forest = fit_forest(ds, &rows, n_trees, &CartParams::default(), subspace_rate, seed)?;
        put(out, FpForest { inner: forest })
    })
}

#[no_mangle]
pub unsafe extern "C" fn fp_forest_from_json(json: *const c_char, out: *mut *mut FpForest) -> FpStatus {
    guard(|| {
        let forest = Forest::from_json(text(json, "json")?)?;
        put(out, FpForest { inner: forest })
    })
}

#[no_mangle]
pub unsafe extern "C" fn fp_forest_to_json(forest: *const FpForest, out: *mut *mut c_char) -> FpStatus {
    guard(|| put_string(out, borrow(forest, "forest")?.inner.to_json()?))
}

/// Tree count, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn fp_forest_n_trees(forest: *const FpForest) -> usize {
    forest.as_ref().map_or(0, |f| f.inner.len())
}

/// Predicts every row of `ds` into `out` (length `out_len == n_rows`).
/// With `weights == NULL` the trees are averaged; otherwise `n_weights` must
/// equal the tree count and the prediction is `Σ w_i t_i`.
#[no_mangle]
pub unsafe extern "C" fn fp_forest_predict(
    forest: *const FpForest,
    ds: *const FpDataset,
    weights: *const f64,
    n_weights: usize,
    out: *mut f64,
    out_len: usize,
) -> FpStatus {
    guard(|| {
        let forest = &borrow(forest, "forest")?.inner;
        let ds = &borrow(ds, "dataset")?.inner;
        let w = if weights.is_null() {
            None
        } else {
            Some(slice(weights, n_weights, "weights")?)
        };
        let rows: Vec<usize> = (0..ds.n_rows()).collect();
        let pred = predict_forest(forest, ds, &rows, w)?;
        copy_out(&pred, out, out_len)
    })
}

#[no_mangle]
pub unsafe extern "C" fn fp_forest_free(forest: *mut FpForest) {
    if !forest.is_null() {
        drop(Box::from_raw(forest));
    }
}

// ---- pruning ----

/// Prunes `forest` on every row of `validation`. `method` is one of `SFS`,
/// `SBS'`, `BSF`, `LASSO` or a sized variant such as `BSF3` or `LASSO4`;
/// `seed` drives the Lasso cross-validation folds.
#[no_mangle]
pub unsafe extern "C" fn fp_prune(
    forest: *const FpForest,
    validation: *const FpDataset,
    method: *const c_char,
    seed: u64,
    out: *mut *mut FpPruneResult,
) -> FpStatus {
    guard(|| {
        let forest = &borrow(forest, "forest")?.inner;
        let ds = &borrow(validation, "validation")?.inner;
        let spec: MethodSpec = text(method, "method")?.parse()?;
        forest.check_schema(ds)?;
        let rows: Vec<usize> = (0..ds.n_rows()).collect();
        let p = prediction_matrix(forest, ds, &rows)?;
        let cv = CvOptions {
            seed,
            ..CvOptions::default()
        };
        put(
            out,
            FpPruneResult {
                inner: prune(&p, ds.response(), spec, &cv)?,
            },
        )
    })
}

/// Number of selected trees, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn fp_prune_result_n_selected(r: *const FpPruneResult) -> usize {
    r.as_ref().map_or(0, |r| r.inner.selected.len())
}

/// Copies the ascending selected tree indices into `out` (length `len`).
#[no_mangle]
pub unsafe extern "C" fn fp_prune_result_selected(r: *const FpPruneResult, out: *mut usize, len: usize) -> FpStatus {
    guard(|| copy_out(&borrow(r, "prune result")?.inner.selected, out, len))
}

/// Copies the weights of the selected trees into `out` (length `len`).
#[no_mangle]
pub unsafe extern "C" fn fp_prune_result_weights(r: *const FpPruneResult, out: *mut f64, len: usize) -> FpStatus {
    guard(|| copy_out(&borrow(r, "prune result")?.inner.weights, out, len))
}

/// Validation MSPE of the selection, or NaN for NULL.
#[no_mangle]
pub unsafe extern "C" fn fp_prune_result_validation_mspe(r: *const FpPruneResult) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.inner.validation_mspe)
}

#[no_mangle]
pub unsafe extern "C" fn fp_prune_result_to_json(r: *const FpPruneResult, out: *mut *mut c_char) -> FpStatus {
    guard(|| put_string(out, borrow(r, "prune result")?.inner.to_json()?))
}

#[no_mangle]
pub unsafe extern "C" fn fp_prune_result_free(r: *mut FpPruneResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Merges the selected trees into one tree and writes its text dump.
/// Fails with `InvalidArgument` when the merge would exceed `max_leaves`.
#[no_mangle]
pub unsafe extern "C" fn fp_merge_to_text(
    forest: *const FpForest,
    r: *const FpPruneResult,
    max_leaves: usize,
    out: *mut *mut c_char,
) -> FpStatus {
    guard(|| {
        let merged = merge_selection(
            &borrow(forest, "forest")?.inner,
            &borrow(r, "prune result")?.inner,
            max_leaves,
        )?;
        put_string(out, merged.tree.to_text(None))
    })
}

// ---- bounds ----

/// Slack of the Lasso generalization bound.
#[no_mangle]
pub unsafe extern "C" fn fp_lasso_generalization_bound(
    n: f64,
    b: usize,
    delta: f64,
    m: f64,
    r: f64,
    lambda_l1: f64,
    out: *mut f64,
) -> FpStatus {
    guard(|| {
        let i = BoundInputs {
            n,
            b,
            delta,
            m,
            r,
            lambda_l1,
            ..BoundInputs::default()
        };
        put_f64(out, lasso_generalization_bound(&i))
    })
}

/// Slack of the best-sub-forest bound; requires `1 <= k <= b/2`.
#[no_mangle]
pub unsafe extern "C" fn fp_bsf_bound(n: f64, b: usize, k: usize, delta: f64, m: f64, out: *mut f64) -> FpStatus {
    guard(|| {
        let i = BoundInputs {
            n,
            b,
            k,
            delta,
            m,
            ..BoundInputs::default()
        };
        put_f64(out, bsf_bound(&i))
    })
}

/// Slack of the forward-selection bound; requires even `b`.
#[no_mangle]
pub unsafe extern "C" fn fp_sfs_bound(n: f64, b: usize, delta: f64, m: f64, out: *mut f64) -> FpStatus {
    guard(|| {
        let i = BoundInputs {
            n,
            b,
            delta,
            m,
            ..BoundInputs::default()
        };
        put_f64(out, sfs_bound(&i))
    })
}

#[no_mangle]
pub unsafe extern "C" fn fp_finite_class_bound(
    cardinality: u64,
    n: f64,
    delta: f64,
    m: f64,
    out: *mut f64,
) -> FpStatus {
    guard(|| put_f64(out, finite_class_bound(cardinality, n, delta, m)))
}

/// Out-of-sample risk bound of the non-negative Lasso.
#[no_mangle]
pub unsafe extern "C" fn fp_lasso_risk_bound(
    tau: f64,
    m: f64,
    sigma: f64,
    b: usize,
    n: f64,
    out: *mut f64,
) -> FpStatus {
    guard(|| put_f64(out, lasso_risk_bound(tau, m, sigma, b, n)))
}
