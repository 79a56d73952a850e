use std::ffi::{CStr, CString};
use std::ptr;

use eem_ffi::*;

/// Two well separated clusters on a deterministic lattice, row-major.
fn clusters() -> (Vec<f64>, Vec<i32>) {
    let mut x = Vec::new();
    let mut labels = Vec::new();
    for i in 0..60 {
        let (cx, label) = if i % 2 == 0 { (5.0, 1) } else { (-5.0, 0) };
        let a = (i as f64 * 0.37).sin();
        let b = (i as f64 * 0.91).cos();
        x.extend_from_slice(&[cx + a, b, a * b]);
        labels.push(label);
    }
    (x, labels)
}

fn fit(algorithm: i32) -> *mut EemHandle {
    let (x, labels) = clusters();
    let mut handle = ptr::null_mut();
    let status = unsafe {
        eem_fit(x.as_ptr(), labels.as_ptr(), 60, 3, algorithm, EEM_ACT_SIG, 20, 0.5, 4, &mut handle)
    };
    assert_eq!(status, EemStatus::Ok, "{}", last_error());
    assert!(!handle.is_null());
    handle
}

fn last_error() -> String {
    let p = eem_last_error();
    if p.is_null() {
        String::new()
    } else {
        unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
    }
}

fn predict(handle: *const EemHandle, x: &[f64]) -> Vec<i32> {
    let n = x.len() / 3;
    let mut out = vec![0; n];
    assert_eq!(unsafe { eem_predict(handle, x.as_ptr(), n, 3, out.as_mut_ptr()) }, EemStatus::Ok);
    out
}

fn expected_labels() -> Vec<i32> {
    clusters().1.iter().map(|&l| if l == 1 { 1 } else { -1 }).collect()
}

#[test]
fn fit_predict_save_load_round_trip() {
    let (x, _) = clusters();
    let dir = tempfile::tempdir().unwrap();
    for algorithm in [EEM_ALGO_EEM, EEM_ALGO_EEKM, EEM_ALGO_WELM] {
        let handle = fit(algorithm);
        assert_eq!(unsafe { eem_input_dim(handle) }, 3);
        let labels = predict(handle, &x);
        assert_eq!(labels, expected_labels(), "algorithm {algorithm}");

        let path = CString::new(dir.path().join(format!("m{algorithm}.json")).to_str().unwrap()).unwrap();
        assert_eq!(unsafe { eem_save(handle, path.as_ptr()) }, EemStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(unsafe { eem_load(path.as_ptr(), &mut loaded) }, EemStatus::Ok);
        assert_eq!(predict(loaded, &x), labels);
        unsafe {
            eem_free(handle);
            eem_free(loaded);
        }
    }
}

#[test]
fn probabilities_and_costs() {
    let (x, _) = clusters();
    let handle = fit(EEM_ALGO_EEM);
    let mut p = vec![0.0; 60];
    assert_eq!(unsafe { eem_predict_proba(handle, x.as_ptr(), 60, 3, p.as_mut_ptr()) }, EemStatus::Ok);
    for (pi, l) in p.iter().zip(expected_labels()) {
        assert!((0.0..=1.0).contains(pi));
        assert_eq!(*pi >= 0.5, l == 1, "p {pi} label {l}");
    }
    let mut labels = vec![0; 60];
    let status = unsafe { eem_predict_cost_sensitive(handle, x.as_ptr(), 60, 3, 1.0, 1.0, labels.as_mut_ptr()) };
    assert_eq!(status, EemStatus::Ok);
    assert_eq!(labels, expected_labels());
    let status = unsafe { eem_predict_cost_sensitive(handle, x.as_ptr(), 60, 3, -1.0, 1.0, labels.as_mut_ptr()) };
    assert_eq!(status, EemStatus::InvalidArgument);
    unsafe { eem_free(handle) };
}

#[test]
fn welm_has_no_probabilities() {
    let (x, _) = clusters();
    let handle = fit(EEM_ALGO_WELM);
    let mut p = vec![0.0; 60];
    assert_eq!(unsafe { eem_predict_proba(handle, x.as_ptr(), 60, 3, p.as_mut_ptr()) }, EemStatus::Unsupported);
    assert!(!last_error().is_empty());
    unsafe { eem_free(handle) };
}

#[test]
fn null_pointers_are_reported() {
    let (x, labels) = clusters();
    let mut handle = ptr::null_mut();
    let status = unsafe { eem_fit(ptr::null(), labels.as_ptr(), 60, 3, 0, 0, 20, 0.0, 0, &mut handle) };
    assert_eq!(status, EemStatus::NullPointer);
    assert!(last_error().contains("null"));
    let status = unsafe { eem_fit(x.as_ptr(), labels.as_ptr(), 60, 3, 0, 0, 20, 0.0, 0, ptr::null_mut()) };
    assert_eq!(status, EemStatus::NullPointer);
    let mut out = vec![0; 60];
    assert_eq!(unsafe { eem_predict(ptr::null(), x.as_ptr(), 60, 3, out.as_mut_ptr()) }, EemStatus::NullPointer);
    let model = fit(EEM_ALGO_EEM);
    assert_eq!(unsafe { eem_predict(model, x.as_ptr(), 60, 3, ptr::null_mut()) }, EemStatus::NullPointer);
    assert_eq!(unsafe { eem_save(model, ptr::null()) }, EemStatus::NullPointer);
    assert_eq!(unsafe { eem_input_dim(ptr::null()) }, 0);
    unsafe {
        eem_free(model);
        eem_free(ptr::null_mut());
    }
}

#[test]
fn bad_arguments_are_reported() {
    let (x, mut labels) = clusters();
    let mut handle = ptr::null_mut();
    for (algorithm, activation, h) in [(7, 0, 20), (0, 9, 20), (0, 0, 0)] {
        let status = unsafe { eem_fit(x.as_ptr(), labels.as_ptr(), 60, 3, algorithm, activation, h, 0.5, 0, &mut handle) };
        assert_eq!(status, EemStatus::InvalidArgument, "{algorithm} {activation} {h}");
        assert!(handle.is_null());
        assert!(!last_error().is_empty());
    }
    labels[3] = 2;
    let status = unsafe { eem_fit(x.as_ptr(), labels.as_ptr(), 60, 3, 0, 0, 20, 0.0, 0, &mut handle) };
    assert_eq!(status, EemStatus::InvalidArgument);
    assert!(last_error().contains("label 2"));
}

#[test]
fn single_class_is_reported() {
    let (x, _) = clusters();
    let labels = vec![1; 60];
    let mut handle = ptr::null_mut();
    let status = unsafe { eem_fit(x.as_ptr(), labels.as_ptr(), 60, 3, 0, 0, 20, 0.0, 0, &mut handle) };
    assert_eq!(status, EemStatus::MissingClass);
}

#[test]
fn dimension_mismatch_is_reported() {
    let (x, _) = clusters();
    let model = fit(EEM_ALGO_EEM);
    let mut out = vec![0; 90];
    let status = unsafe { eem_predict(model, x.as_ptr(), 90, 2, out.as_mut_ptr()) };
    assert_eq!(status, EemStatus::DimensionMismatch);
    assert!(last_error().contains("dimension"));
    unsafe { eem_free(model) };
}

#[test]
fn missing_model_file_is_reported() {
    let path = CString::new("/nonexistent/dir/model.json").unwrap();
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { eem_load(path.as_ptr(), &mut handle) }, EemStatus::Io);
    assert!(handle.is_null());
}

#[test]
fn header_declares_the_interface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/eem.h")).unwrap();
    for name in [
        "typedef struct EemHandle EemHandle",
        "EEM_STATUS_OK",
        "EEM_STATUS_DIMENSION_MISMATCH",
        "eem_last_error",
        "eem_fit",
        "eem_load",
        "eem_save",
        "eem_input_dim",
        "eem_predict(",
        "eem_predict_proba",
        "eem_predict_cost_sensitive",
        "eem_free",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
