//! C ABI for the `rmcpd` change-point detector.
//!
//! Every fallible function returns an [`RmcpdStatus`]. On failure the message
//! is kept per thread and can be read with [`rmcpd_last_error_message`].
//! Panics never cross the boundary; they are reported as
//! `RMCPD_STATUS_PANIC`.
//!
//! Objects are opaque handles created by `*_new`/`*_load_csv`/... and
//! released with the matching `*_free`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rmcpd::dataset::{generate, load_panel_csv, Family, GeneratorConfig, PanelDataset};
use rmcpd::detect::{detect, DetectConfig, Window};
use rmcpd::pvalue::{critical_value, nu, Channel, Correction};
use rmcpd::segmentation::{binary_segmentation, SegmentationConfig, SegmentationResult};
use rmcpd::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RmcpdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Structural = 5,
    Degenerate = 6,
    Numerical = 7,
    UnsupportedSize = 8,
    Internal = 9,
    Panic = 10,
}

/// Values accepted for `channel` arguments.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RmcpdChannel {
    OutW = 0,
    OutD = 1,
    In = 2,
    InTilde = 3,
}

/// Values accepted for `family` arguments.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RmcpdFamily {
    Gaussian = 0,
    Lognormal = 1,
    GaussianMixture = 2,
}

/// Opaque panel dataset.
pub struct RmcpdDataset {
    inner: PanelDataset,
}

/// Opaque segmentation result.
pub struct RmcpdSegmentation {
    inner: SegmentationResult,
}

/// Options of the single change-point test.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct RmcpdDetectOptions {
    /// Number of successive MSTs.
    pub k: usize,
    pub n0_frac: f64,
    pub n1_frac: f64,
    pub alpha: f64,
    /// 0 uncorrected, 1 skewness corrected.
    pub skew_correction: c_int,
    /// Permutation replicates; 0 disables the permutation test.
    pub permutations: usize,
    pub seed: u64,
}

/// Outcome of the single change-point test. Undefined values are NaN.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct RmcpdDetectResult {
    pub tau_hat: usize,
    pub m_star: f64,
    pub p_value: f64,
    pub reject: c_int,
    pub z_out_w: f64,
    pub z_out_d: f64,
    pub z_in: f64,
    pub z_in_tilde: f64,
    pub p_out_w: f64,
    pub p_out_d: f64,
    pub p_in: f64,
    pub p_in_tilde: f64,
    pub permutation_p_value: f64,
    pub out_edges: usize,
    pub in_edges: usize,
    pub varrho: f64,
    pub warning_count: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RmcpdStatus {
    match e {
        Error::Structural(_) => RmcpdStatus::Structural,
        Error::Parse { .. } | Error::Csv(_) => RmcpdStatus::Parse,
        Error::Config(_) | Error::Domain(_) => RmcpdStatus::InvalidArgument,
        Error::UnsupportedSize(_) => RmcpdStatus::UnsupportedSize,
        Error::Degenerate(_) => RmcpdStatus::Degenerate,
        Error::Numerical(_) => RmcpdStatus::Numerical,
        Error::Io { .. } => RmcpdStatus::Io,
        Error::Internal(_) => RmcpdStatus::Internal,
    }
}

struct Fail(RmcpdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(RmcpdStatus::NullPointer, format!("{what} must not be null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> RmcpdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RmcpdStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            RmcpdStatus::Panic
        }
    }
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Message of the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rmcpd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rmcpd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `n * ell * d` values laid out as `[individual][rep][feature]`.
#[no_mangle]
pub unsafe extern "C" fn rmcpd_dataset_new(
    n: usize,
    ell: usize,
    d: usize,
    values: *const f64,
    out: *mut *mut RmcpdDataset,
) -> RmcpdStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        let len = n
            .checked_mul(ell)
            .and_then(|v| v.checked_mul(d))
            .ok_or_else(|| Fail(RmcpdStatus::InvalidArgument, "n * ell * d overflows".into()))?;
        let data = std::slice::from_raw_parts(values, len).to_vec();
        let ds = PanelDataset::new(n, ell, d, data, None)?;
        write_out(out, Box::into_raw(Box::new(RmcpdDataset { inner: ds })), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn rmcpd_dataset_load_csv(
    path: *const c_char,
    n: usize,
    ell: usize,
    out: *mut *mut RmcpdDataset,
) -> RmcpdStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail(RmcpdStatus::InvalidArgument, "path is not valid UTF-8".into()))?;
        let ds = load_panel_csv(path, n, ell)?;
        write_out(out, Box::into_raw(Box::new(RmcpdDataset { inner: ds })), "out")
    })
}

/// Draws data from one of the standard settings (1..=4).
#[no_mangle]
pub unsafe extern "C" fn rmcpd_dataset_generate(
    family: c_int,
    setting: u8,
    n: usize,
    ell: usize,
    d: usize,
    tau: usize,
    seed: u64,
    out: *mut *mut RmcpdDataset,
) -> RmcpdStatus {
    guard(|| {
        let family = match family {
            x if x == RmcpdFamily::Gaussian as c_int => Family::Gaussian,
            x if x == RmcpdFamily::Lognormal as c_int => Family::Lognormal,
            x if x == RmcpdFamily::GaussianMixture as c_int => Family::GaussianMixture,
            other => return Err(Fail(RmcpdStatus::InvalidArgument, format!("unknown family {other}"))),
        };
        let cfg = GeneratorConfig::setting(family, setting, tau, seed)?;
        let ds = generate(&cfg, n, ell, d)?;
        write_out(out, Box::into_raw(Box::new(RmcpdDataset { inner: ds })), "out")
    })
}

/// Shape of a dataset; any of the output pointers may be NULL.
#[no_mangle]
pub unsafe extern "C" fn rmcpd_dataset_shape(
    ds: *const RmcpdDataset,
    n: *mut usize,
    ell: *mut usize,
    d: *mut usize,
) -> RmcpdStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        for (p, v) in [(n, ds.inner.n()), (ell, ds.inner.ell()), (d, ds.inner.d())] {
            if !p.is_null() {
                p.write(v);
            }
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rmcpd_dataset_free(ds: *mut RmcpdDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

#[no_mangle]
pub extern "C" fn rmcpd_detect_options_default() -> RmcpdDetectOptions {
    let d = DetectConfig::default();
    let (f0, f1) = match d.window {
        Window::Fractions(a, b) => (a, b),
        Window::Explicit(..) => (0.05, 0.95),
    };
    RmcpdDetectOptions {
        k: d.k,
        n0_frac: f0,
        n1_frac: f1,
        alpha: d.alpha,
        skew_correction: 1,
        permutations: d.permutations,
        seed: d.seed,
    }
}

fn detect_config(o: &RmcpdDetectOptions) -> DetectConfig {
    DetectConfig {
        k: o.k,
        window: Window::Fractions(o.n0_frac, o.n1_frac),
        alpha: o.alpha,
        correction: if o.skew_correction != 0 { Correction::A2 } else { Correction::A1 },
        permutations: o.permutations,
        seed: o.seed,
        decide_by_permutation: false,
    }
}

/// Single change-point test. `options` may be NULL for the defaults.
#[no_mangle]
pub unsafe extern "C" fn rmcpd_detect(
    ds: *const RmcpdDataset,
    options: *const RmcpdDetectOptions,
    out: *mut RmcpdDetectResult,
) -> RmcpdStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        let opts = options.as_ref().copied().unwrap_or_else(|| rmcpd_detect_options_default());
        let r = detect(&ds.inner, &detect_config(&opts))?;
        let ch = |c: Channel| r.channels.iter().find(|x| x.channel == c);
        let at = |c| ch(c).map_or(f64::NAN, |x| x.at_tau);
        let pv = |c| ch(c).map_or(f64::NAN, |x| x.p_value);
        let res = RmcpdDetectResult {
            tau_hat: r.tau_hat,
            m_star: r.m_star,
            p_value: r.p_value,
            reject: c_int::from(r.reject),
            z_out_w: at(Channel::OutW),
            z_out_d: at(Channel::OutD),
            z_in: at(Channel::In),
            z_in_tilde: at(Channel::InTilde),
            p_out_w: pv(Channel::OutW),
            p_out_d: pv(Channel::OutD),
            p_in: pv(Channel::In),
            p_in_tilde: pv(Channel::InTilde),
            permutation_p_value: r.permutation.map_or(f64::NAN, |p| p.p_value),
            out_edges: r.graph.out_edges,
            in_edges: r.graph.in_edges,
            varrho: r.graph.varrho.unwrap_or(f64::NAN),
            warning_count: r.warnings.len(),
        };
        write_out(out, res, "out")
    })
}

/// Binary segmentation. `min_seg = 0` selects the default minimum length;
/// a nonzero `bonferroni` halves alpha at each recursion level.
#[no_mangle]
pub unsafe extern "C" fn rmcpd_segment(
    ds: *const RmcpdDataset,
    options: *const RmcpdDetectOptions,
    min_seg: usize,
    bonferroni: c_int,
    out: *mut *mut RmcpdSegmentation,
) -> RmcpdStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        let opts = options.as_ref().copied().unwrap_or_else(|| rmcpd_detect_options_default());
        let cfg = SegmentationConfig {
            detect: detect_config(&opts),
            min_seg: (min_seg > 0).then_some(min_seg),
            bonferroni: bonferroni != 0,
            max_depth: None,
        };
        let res = binary_segmentation(&ds.inner, &cfg)?;
        write_out(out, Box::into_raw(Box::new(RmcpdSegmentation { inner: res })), "out")
    })
}

/// Number of detected change-points (0 for a NULL handle).
#[no_mangle]
pub unsafe extern "C" fn rmcpd_segmentation_count(seg: *const RmcpdSegmentation) -> usize {
    seg.as_ref().map_or(0, |s| s.inner.change_points.len())
}

/// Change-point `index` in increasing order: the last individual (1-based)
/// before the change and its p-value.
#[no_mangle]
pub unsafe extern "C" fn rmcpd_segmentation_get(
    seg: *const RmcpdSegmentation,
    index: usize,
    position: *mut usize,
    p_value: *mut f64,
) -> RmcpdStatus {
    guard(|| {
        let seg = seg.as_ref().ok_or_else(|| null("segmentation"))?;
        let cp = seg.inner.change_points.get(index).ok_or_else(|| {
            Fail(
                RmcpdStatus::InvalidArgument,
                format!("index {index} out of range ({} change-points)", seg.inner.change_points.len()),
            )
        })?;
        write_out(position, cp.position, "position")?;
        write_out(p_value, cp.p_value, "p_value")
    })
}

#[no_mangle]
pub unsafe extern "C" fn rmcpd_segmentation_free(seg: *mut RmcpdSegmentation) {
    if !seg.is_null() {
        drop(Box::from_raw(seg));
    }
}

/// Uncorrected (graph-free) critical value of a single channel.
#[no_mangle]
pub unsafe extern "C" fn rmcpd_critical_value_a1(
    alpha: f64,
    channel: c_int,
    n: usize,
    n0: usize,
    n1: usize,
    out: *mut f64,
) -> RmcpdStatus {
    guard(|| {
        let channel = match channel {
            x if x == RmcpdChannel::OutW as c_int => Channel::OutW,
            x if x == RmcpdChannel::OutD as c_int => Channel::OutD,
            x if x == RmcpdChannel::In as c_int => Channel::In,
            x if x == RmcpdChannel::InTilde as c_int => Channel::InTilde,
            other => return Err(Fail(RmcpdStatus::InvalidArgument, format!("unknown channel {other}"))),
        };
        let b = critical_value(alpha, channel, Correction::A1, n, n0, n1, None)?;
        write_out(out, b, "out")
    })
}

/// Overshoot correction function.
#[no_mangle]
pub unsafe extern "C" fn rmcpd_nu(x: f64, out: *mut f64) -> RmcpdStatus {
    guard(|| write_out(out, nu(x)?, "out"))
}
