use std::ffi::{CStr, CString};
use std::ptr;

use rmcpd_ffi::*;

fn last_error() -> String {
    let p = rmcpd_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn generated(setting: u8, n: usize, tau: usize, seed: u64) -> *mut RmcpdDataset {
    let mut ds = ptr::null_mut();
    let st = unsafe { rmcpd_dataset_generate(RmcpdFamily::Gaussian as i32, setting, n, 3, 8, tau, seed, &mut ds) };
    assert_eq!(st, RmcpdStatus::Ok);
    ds
}

#[test]
fn nu_and_critical_values() {
    let mut v = f64::NAN;
    assert_eq!(unsafe { rmcpd_nu(0.0, &mut v) }, RmcpdStatus::Ok);
    assert_eq!(v, 1.0);
    assert_eq!(unsafe { rmcpd_nu(-1.0, &mut v) }, RmcpdStatus::InvalidArgument);
    assert!(last_error().contains("nu"));
    assert_eq!(unsafe { rmcpd_nu(1.0, ptr::null_mut()) }, RmcpdStatus::NullPointer);

    let mut b = 0.0;
    let st = unsafe { rmcpd_critical_value_a1(0.05, RmcpdChannel::OutW as i32, 200, 10, 190, &mut b) };
    assert_eq!(st, RmcpdStatus::Ok);
    assert!((b - 2.986).abs() < 0.005);
    let st = unsafe { rmcpd_critical_value_a1(0.05, 42, 200, 10, 190, &mut b) };
    assert_eq!(st, RmcpdStatus::InvalidArgument);
}

#[test]
fn dataset_lifecycle() {
    let values: Vec<f64> = (0..4 * 2 * 3).map(f64::from).collect();
    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { rmcpd_dataset_new(4, 2, 3, values.as_ptr(), &mut ds) }, RmcpdStatus::Ok);
    let (mut n, mut ell, mut d) = (0, 0, 0);
    assert_eq!(unsafe { rmcpd_dataset_shape(ds, &mut n, &mut ell, &mut d) }, RmcpdStatus::Ok);
    assert_eq!((n, ell, d), (4, 2, 3));
    unsafe { rmcpd_dataset_free(ds) };
    unsafe { rmcpd_dataset_free(ptr::null_mut()) };

    let bad = f64::NAN;
    let st = unsafe { rmcpd_dataset_new(1, 1, 1, &bad, &mut ds) };
    assert_eq!(st, RmcpdStatus::Structural);
    assert_eq!(unsafe { rmcpd_dataset_new(2, 1, 1, ptr::null(), &mut ds) }, RmcpdStatus::NullPointer);

    let path = CString::new("/definitely/not/here.csv").unwrap();
    assert_eq!(unsafe { rmcpd_dataset_load_csv(path.as_ptr(), 4, 2, &mut ds) }, RmcpdStatus::Io);
    assert!(last_error().contains("not/here"));
}

#[test]
fn load_csv_through_the_abi() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("panel.csv");
    let mut text = String::from("individual_id,rep_index,x1,x2\n");
    for i in 1..=5 {
        for j in 1..=2 {
            text.push_str(&format!("{i},{j},{}.5,{}\n", i * j, i + j));
        }
    }
    std::fs::write(&file, text).unwrap();
    let path = CString::new(file.to_str().unwrap()).unwrap();
    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { rmcpd_dataset_load_csv(path.as_ptr(), 5, 2, &mut ds) }, RmcpdStatus::Ok);
    let mut d = 0;
    assert_eq!(unsafe { rmcpd_dataset_shape(ds, ptr::null_mut(), ptr::null_mut(), &mut d) }, RmcpdStatus::Ok);
    assert_eq!(d, 2);
    unsafe { rmcpd_dataset_free(ds) };
}

#[test]
fn detect_and_segment() {
    let ds = generated(3, 40, 20, 9);
    let opts = rmcpd_detect_options_default();
    assert_eq!(opts.k, 9);
    let mut res = std::mem::MaybeUninit::<RmcpdDetectResult>::uninit();
    assert_eq!(unsafe { rmcpd_detect(ds, &opts, res.as_mut_ptr()) }, RmcpdStatus::Ok);
    let res = unsafe { res.assume_init() };
    assert!(res.p_value >= 0.0 && res.p_value <= 1.0);
    assert!(res.tau_hat >= 2 && res.tau_hat <= 38);
    assert!(res.permutation_p_value.is_nan());
    assert!(res.out_edges + res.in_edges == 9 * (40 * 3 - 1));

    let mut seg = ptr::null_mut();
    assert_eq!(unsafe { rmcpd_segment(ds, ptr::null(), 0, 0, &mut seg) }, RmcpdStatus::Ok);
    let count = unsafe { rmcpd_segmentation_count(seg) };
    let mut prev = 0;
    for i in 0..count {
        let (mut pos, mut p) = (0usize, 0.0);
        assert_eq!(unsafe { rmcpd_segmentation_get(seg, i, &mut pos, &mut p) }, RmcpdStatus::Ok);
        assert!(pos > prev && p < 0.05);
        prev = pos;
    }
    let (mut pos, mut p) = (0usize, 0.0);
    assert_eq!(unsafe { rmcpd_segmentation_get(seg, count, &mut pos, &mut p) }, RmcpdStatus::InvalidArgument);
    unsafe { rmcpd_segmentation_free(seg) };
    unsafe { rmcpd_dataset_free(ds) };
}

#[test]
fn invalid_options_are_reported() {
    let ds = generated(1, 20, 10, 1);
    let mut opts = rmcpd_detect_options_default();
    opts.alpha = 2.0;
    let mut res = std::mem::MaybeUninit::<RmcpdDetectResult>::uninit();
    assert_eq!(unsafe { rmcpd_detect(ds, &opts, res.as_mut_ptr()) }, RmcpdStatus::InvalidArgument);
    assert!(last_error().contains("alpha"));
    assert_eq!(unsafe { rmcpd_detect(ptr::null(), &opts, res.as_mut_ptr()) }, RmcpdStatus::NullPointer);
    unsafe { rmcpd_dataset_free(ds) };
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(rmcpd_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/rmcpd.h")).unwrap();
    for name in [
        "rmcpd_last_error_message",
        "rmcpd_dataset_new",
        "rmcpd_dataset_load_csv",
        "rmcpd_dataset_generate",
        "rmcpd_dataset_free",
        "rmcpd_detect",
        "rmcpd_segment",
        "rmcpd_segmentation_free",
        "rmcpd_critical_value_a1",
        "rmcpd_nu",
        "RMCPD_STATUS_PANIC",
        "RMCPD_CHANNEL_IN_TILDE",
        "typedef struct RmcpdDataset RmcpdDataset;",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
