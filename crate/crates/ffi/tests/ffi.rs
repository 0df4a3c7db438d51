use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use forestprune_ffi::*;

fn last_error() -> String {
    let p = fp_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn take_string(p: *mut std::ffi::c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { fp_string_free(p) };
    s
}

#[test]
fn fit_prune_merge_round_trip() {
    unsafe {
        let mut train = ptr::null_mut();
        assert_eq!(fp_dataset_generate(400, 2, 0.1, 7, &mut train), FpStatus::Ok);
        let mut valid = ptr::null_mut();
        assert_eq!(fp_dataset_generate(200, 2, 0.1, 8, &mut valid), FpStatus::Ok);
        assert_eq!((fp_dataset_n_rows(train), fp_dataset_n_cols(train)), (400, 10));

        let mut forest = ptr::null_mut();
        assert_eq!(fp_forest_fit(train, 6, 0.8, 1, &mut forest), FpStatus::Ok);
        assert_eq!(fp_forest_n_trees(forest), 6);

        let mut json = ptr::null_mut();
        assert_eq!(fp_forest_to_json(forest, &mut json), FpStatus::Ok);
        let json = CString::new(take_string(json)).unwrap();
        let mut again = ptr::null_mut();
        assert_eq!(fp_forest_from_json(json.as_ptr(), &mut again), FpStatus::Ok);

        let n = fp_dataset_n_rows(valid);
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        assert_eq!(
            fp_forest_predict(forest, valid, ptr::null(), 0, a.as_mut_ptr(), n),
            FpStatus::Ok
        );
        let w = [1.0 / 6.0; 6];
        assert_eq!(
            fp_forest_predict(again, valid, w.as_ptr(), 6, b.as_mut_ptr(), n),
            FpStatus::Ok
        );
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }

        let method = CString::new("BSF2").unwrap();
        let mut result = ptr::null_mut();
        assert_eq!(fp_prune(forest, valid, method.as_ptr(), 3, &mut result), FpStatus::Ok);
        let k = fp_prune_result_n_selected(result);
        assert!((1..=2).contains(&k));
        let mut idx = vec![0usize; k];
        let mut weights = vec![0.0; k];
        assert_eq!(fp_prune_result_selected(result, idx.as_mut_ptr(), k), FpStatus::Ok);
        assert_eq!(fp_prune_result_weights(result, weights.as_mut_ptr(), k), FpStatus::Ok);
        assert!(idx.windows(2).all(|p| p[0] < p[1]) && idx.iter().all(|&i| i < 6));
        assert!(weights.iter().all(|&x| x == 1.0 / k as f64));
        assert!(fp_prune_result_validation_mspe(result) > 0.0);

        let mut text = ptr::null_mut();
        assert_eq!(fp_merge_to_text(forest, result, 1_000_000, &mut text), FpStatus::Ok);
        assert!(take_string(text).contains("->"));
        let mut text = ptr::null_mut();
        assert_eq!(
            fp_merge_to_text(forest, result, 1, &mut text),
            FpStatus::InvalidArgument
        );
        assert!(last_error().contains("leaf budget"));

        let mut rj = ptr::null_mut();
        assert_eq!(fp_prune_result_to_json(result, &mut rj), FpStatus::Ok);
        assert!(take_string(rj).contains("\"selected\""));

        fp_prune_result_free(result);
        fp_forest_free(again);
        fp_forest_free(forest);
        fp_dataset_free(valid);
        fp_dataset_free(train);
    }
}

#[test]
fn errors_and_nulls() {
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(
            fp_dataset_generate(10, 2, 0.1, 1, ptr::null_mut()),
            FpStatus::NullPointer
        );
        assert_eq!(fp_dataset_generate(10, 20, 0.1, 1, &mut ds), FpStatus::Config);
        assert!(last_error().contains("relevant_vars"));

        let x = [1.0, f64::NAN];
        let y = [1.0, 2.0];
        assert_eq!(
            fp_dataset_from_rows(x.as_ptr(), 2, 1, y.as_ptr(), &mut ds),
            FpStatus::InvalidArgument
        );
        assert_eq!(
            fp_dataset_from_rows(ptr::null(), 2, 1, y.as_ptr(), &mut ds),
            FpStatus::NullPointer
        );

        let path = CString::new("/nonexistent/data.csv").unwrap();
        let col = CString::new("y").unwrap();
        assert_eq!(
            fp_dataset_load_csv(path.as_ptr(), col.as_ptr(), &mut ds),
            FpStatus::Parse
        );

        let bad = CString::new("{not json").unwrap();
        let mut f = ptr::null_mut();
        assert_eq!(fp_forest_from_json(bad.as_ptr(), &mut f), FpStatus::Parse);

        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(
            fp_dataset_from_rows(x.as_ptr(), 4, 1, y.as_ptr(), &mut ds),
            FpStatus::Ok
        );
        assert_eq!(fp_forest_fit(ds, 2, 1.0, 1, &mut f), FpStatus::Ok);
        let method = CString::new("ridge").unwrap();
        let mut r = ptr::null_mut();
        assert_eq!(fp_prune(f, ds, method.as_ptr(), 1, &mut r), FpStatus::Config);
        assert!(last_error().contains("valid methods"));
        let mut out = [0.0; 3];
        assert_eq!(
            fp_forest_predict(f, ds, ptr::null(), 0, out.as_mut_ptr(), 3),
            FpStatus::InvalidArgument
        );

        assert_eq!(fp_forest_n_trees(ptr::null()), 0);
        assert!(fp_prune_result_validation_mspe(ptr::null()).is_nan());
        fp_forest_free(f);
        fp_dataset_free(ds);
        fp_dataset_free(ptr::null_mut());
    }
}

#[test]
fn bound_values() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(fp_bsf_bound(1000.0, 100, 4, 0.05, 1.0, &mut v), FpStatus::Ok);
        assert!((v - 0.099_057_189_411_668_4).abs() < 1e-14);
        assert_eq!(
            fp_lasso_generalization_bound(12250.0, 100, 0.05, 1.0, 1.0, 1.0, &mut v),
            FpStatus::Ok
        );
        assert!((v - 0.128_703_458_093_933_8).abs() < 1e-14);
        assert_eq!(fp_sfs_bound(12250.0, 100, 0.05, 1.0, &mut v), FpStatus::Ok);
        assert!((v - 0.060_400_582_781_069_26).abs() < 1e-14);
        assert_eq!(fp_finite_class_bound(10, 100.0, 0.05, 1.0, &mut v), FpStatus::Ok);
        assert!((v - 0.254_909_123_743_678_4).abs() < 1e-14);
        assert_eq!(fp_lasso_risk_bound(1.0, 1.0, 1.0, 100, 1e4, &mut v), FpStatus::Ok);
        assert!((v - 0.421_145_168_619_958_8).abs() < 1e-14);
        assert_eq!(fp_sfs_bound(100.0, 5, 0.05, 1.0, &mut v), FpStatus::Config);
        assert_eq!(
            fp_bsf_bound(100.0, 100, 4, 0.05, 1.0, ptr::null_mut()),
            FpStatus::NullPointer
        );
    }
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(fp_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/forestprune.h")
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(header()).unwrap();
    for name in [
        "typedef struct FpDataset FpDataset",
        "typedef struct FpForest FpForest",
        "typedef struct FpPruneResult FpPruneResult",
        "FP_STATUS_PANIC = 7",
        "fp_last_error_message(void)",
        "fp_prune(",
        "fp_merge_to_text(",
        "fp_bsf_bound(",
        "fp_lasso_risk_bound(",
    ] {
        assert!(h.contains(name), "header lacks {name}");
    }
}

/// The header must be usable from C. Skipped when no C compiler is present.
#[test]
fn header_compiles_as_c() {
    let src = r#"
#include "forestprune.h"
int main(void) {
    FpDataset *ds = NULL;
    double v = 0.0;
    if (fp_dataset_generate(100, 2, 0.1, 1, &ds) != FP_STATUS_OK) return 1;
    fp_bsf_bound(1000.0, 100, 4, 0.05, 1.0, &v);
    fp_dataset_free(ds);
    return 0;
}
"#;
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("use.c");
    std::fs::write(&file, src).unwrap();
    let include = header().parent().unwrap().to_path_buf();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-c", "-o"])
        .arg(dir.path().join("use.o"))
        .arg("-I")
        .arg(include)
        .arg(&file)
        .status();
    match status {
        Ok(s) => assert!(s.success(), "C compile failed"),
        Err(_) => eprintln!("no C compiler; skipping"),
    }
}
