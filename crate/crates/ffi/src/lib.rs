//! C ABI for `smpx`.
//!
//! Every fallible function returns an [`SmpxStatus`]; the message of the last
//! failure on the calling thread is available from [`smpx_last_error_message`].
//! Handles are opaque and must be released with their `_free` function.
//! Strings returned by the library are released with [`smpx_string_free`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use smpx::bench::{records_csv, run_experiment, ExperimentConfig, ExperimentOutput};
use smpx::Error;

/// Status codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmpxStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Numerical = 3,
    Input = 4,
    Domain = 5,
    Io = 6,
    InvalidUtf8 = 7,
    Panic = 8,
}

impl From<&Error> for SmpxStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) => SmpxStatus::Config,
            Error::Numerical(_) => SmpxStatus::Numerical,
            Error::Input(_) => SmpxStatus::Input,
            Error::Domain(_) => SmpxStatus::Domain,
            Error::Io(_) => SmpxStatus::Io,
        }
    }
}

/// A validated experiment configuration.
pub struct SmpxExperiment {
    config: ExperimentConfig,
}

/// The outcome of running an experiment.
pub struct SmpxResult {
    output: ExperimentOutput,
    timing: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: SmpxStatus, msg: String) -> SmpxStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> SmpxStatus) -> SmpxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(SmpxStatus::Panic, "panic inside smpx".into()),
    }
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

/// Message of the last error on this thread, or null. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn smpx_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn smpx_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Parses a TOML or JSON experiment configuration.
#[no_mangle]
pub unsafe extern "C" fn smpx_experiment_new(config: *const c_char, out: *mut *mut SmpxExperiment) -> SmpxStatus {
    guard(|| {
        if config.is_null() || out.is_null() {
            return fail(SmpxStatus::NullPointer, "null argument".into());
        }
        *out = ptr::null_mut();
        let text = match CStr::from_ptr(config).to_str() {
            Ok(t) => t,
            Err(e) => return fail(SmpxStatus::InvalidUtf8, e.to_string()),
        };
        match ExperimentConfig::parse(text) {
            Ok(config) => {
                *out = Box::into_raw(Box::new(SmpxExperiment { config }));
                SmpxStatus::Ok
            }
            Err(e) => fail((&e).into(), e.to_string()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn smpx_experiment_free(exp: *mut SmpxExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Runs an experiment; output files named in the configuration are written.
#[no_mangle]
pub unsafe extern "C" fn smpx_experiment_run(exp: *const SmpxExperiment, out: *mut *mut SmpxResult) -> SmpxStatus {
    guard(|| {
        if exp.is_null() || out.is_null() {
            return fail(SmpxStatus::NullPointer, "null argument".into());
        }
        *out = ptr::null_mut();
        let cfg = &(*exp).config;
        match run_experiment(cfg) {
            Ok(output) => {
                *out = Box::into_raw(Box::new(SmpxResult { output, timing: cfg.timing }));
                SmpxStatus::Ok
            }
            Err(e) => fail((&e).into(), e.to_string()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn smpx_result_free(res: *mut SmpxResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Mean `Err_N` at the final checkpoint and the stepsize used.
#[no_mangle]
pub unsafe extern "C" fn smpx_result_final(res: *const SmpxResult, err_nash: *mut f64, gamma: *mut f64) -> SmpxStatus {
    if res.is_null() || err_nash.is_null() || gamma.is_null() {
        return fail(SmpxStatus::NullPointer, "null argument".into());
    }
    let out = &(*res).output;
    *err_nash = out.summary.final_row().err_nash.mean;
    *gamma = out.prepared.gamma;
    SmpxStatus::Ok
}

/// Per-run CSV rows as a newly allocated string.
#[no_mangle]
pub unsafe extern "C" fn smpx_result_csv(res: *const SmpxResult) -> *mut c_char {
    if res.is_null() {
        set_error("null argument".into());
        return ptr::null_mut();
    }
    let r = &*res;
    into_c_string(records_csv(&r.output.records, r.timing))
}

/// JSON sidecar (configuration, constants, bounds, summary) as a newly allocated string.
#[no_mangle]
pub unsafe extern "C" fn smpx_result_sidecar_json(res: *const SmpxResult) -> *mut c_char {
    if res.is_null() {
        set_error("null argument".into());
        return ptr::null_mut();
    }
    match (*res).output.sidecar.to_json() {
        Ok(s) => into_c_string(s),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

#[no_mangle]
pub unsafe extern "C" fn smpx_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
