use std::ffi::{CStr, CString};
use std::ptr;

use smpx_ffi::*;

const CONFIG: &str = r#"
t = 200
[instance]
builtin = "eig_min"
seed = 2
params = { n = 4, blocks = [2, 2] }
[seeds]
count = 2
"#;

unsafe fn take(s: *mut std::ffi::c_char) -> String {
    assert!(!s.is_null());
    let out = CStr::from_ptr(s).to_str().unwrap().to_owned();
    smpx_string_free(s);
    out
}

#[test]
fn run_through_the_c_abi() {
    let cfg = CString::new(CONFIG).unwrap();
    unsafe {
        let mut exp = ptr::null_mut();
        assert_eq!(smpx_experiment_new(cfg.as_ptr(), &mut exp), SmpxStatus::Ok);
        let mut res = ptr::null_mut();
        assert_eq!(smpx_experiment_run(exp, &mut res), SmpxStatus::Ok);
        let (mut err, mut gamma) = (0.0, 0.0);
        assert_eq!(smpx_result_final(res, &mut err, &mut gamma), SmpxStatus::Ok);
        assert!(err.is_finite() && err >= 0.0 && gamma > 0.0);
        let csv = take(smpx_result_csv(res));
        assert!(csv.starts_with("seed,t_checkpoint,err_nash"));
        let json: serde_json::Value = serde_json::from_str(&take(smpx_result_sidecar_json(res))).unwrap();
        assert_eq!(json["gamma"].as_f64().unwrap(), gamma);
        // A second run is identical.
        let mut again = ptr::null_mut();
        assert_eq!(smpx_experiment_run(exp, &mut again), SmpxStatus::Ok);
        assert_eq!(csv, take(smpx_result_csv(again)));
        smpx_result_free(again);
        smpx_result_free(res);
        smpx_experiment_free(exp);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut exp = ptr::null_mut();
        assert_eq!(smpx_experiment_new(ptr::null(), &mut exp), SmpxStatus::NullPointer);
        let bad = CString::new("t = 0\n[instance]\nbuiltin = \"eig_min\"\n[seeds]\ncount = 1\n").unwrap();
        assert_eq!(smpx_experiment_new(bad.as_ptr(), &mut exp), SmpxStatus::Config);
        assert!(exp.is_null());
        let msg = CStr::from_ptr(smpx_last_error_message()).to_str().unwrap();
        assert!(msg.contains("horizon"), "{msg}");
        assert!(smpx_result_csv(ptr::null()).is_null());
        smpx_experiment_free(ptr::null_mut());
        smpx_result_free(ptr::null_mut());
        smpx_string_free(ptr::null_mut());
        assert_eq!(CStr::from_ptr(smpx_version()).to_str().unwrap(), smpx::VERSION);
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/smpx.h");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{header}\"\nint main(void) {{ SmpxExperiment *e = 0; return smpx_experiment_new(\"\", &e) == SMPX_STATUS_OK; }}\n"
        ),
    )
    .unwrap();
    let status = match std::process::Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"]).arg(&src).status() {
        Ok(s) => s,
        Err(_) => {
            eprintln!("no C compiler; skipping");
            return;
        }
    };
    assert!(status.success());
}
