use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use warpmass_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let len = unsafe { wm_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let msg = unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned();
    assert_eq!(msg.len(), len.min(255));
    msg
}

fn model(n: usize, radius: f64, k: usize, c: f64) -> *mut WmModel {
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { wm_model_sphere_hyperbolic(n, radius, k, c, &mut out) },
        WmStatus::Ok
    );
    assert!(!out.is_null());
    out
}

#[test]
fn model_lifecycle_and_conditions() {
    let m = model(2, 1.0, 2, 1.0);
    assert_eq!(unsafe { wm_model_dimension(m) }, 5);
    let mut report = std::mem::MaybeUninit::<WmConditions>::uninit();
    assert_eq!(
        unsafe { wm_conditions(m, 0.0, report.as_mut_ptr()) },
        WmStatus::Ok
    );
    let report = unsafe { report.assume_init() };
    assert!(report.cond_main_1 && report.vgl && report.cond_main && report.all_hypotheses);
    assert!(report.d > 0.0);
    unsafe { wm_model_free(m) };
    unsafe { wm_model_free(ptr::null_mut()) };
}

#[test]
fn errors_carry_status_and_message() {
    let mut out = ptr::null_mut();
    let status = unsafe { wm_model_sphere_hyperbolic(2, -1.0, 1, 1.0, &mut out) };
    assert_eq!(status, WmStatus::InvalidInput);
    assert!(out.is_null());
    assert!(last_error().contains("radius"), "{}", last_error());

    assert_eq!(
        unsafe { wm_model_sphere_hyperbolic(2, 1.0, 1, 1.0, ptr::null_mut()) },
        WmStatus::NullPointer
    );
    assert_eq!(
        unsafe { wm_conditions(ptr::null(), 0.0, ptr::null_mut()) },
        WmStatus::NullPointer
    );
    assert_eq!(unsafe { wm_model_dimension(ptr::null()) }, 0);

    let mut q = 0.0;
    assert_eq!(
        unsafe { wm_q_star_sphere(2, &mut q) },
        WmStatus::InvalidInput
    );
    assert_eq!(unsafe { wm_q_star_sphere(4, &mut q) }, WmStatus::Ok);
    assert!((q - 12.0 * (8.0 * std::f64::consts::PI.powi(2) / 3.0).sqrt()).abs() < 1e-12);
}

#[test]
fn decay_rate_through_abi() {
    let m = model(2, 1.0, 1, 0.5);
    let (mut predicted, mut fitted) = (0.0, 0.0);
    assert_eq!(
        unsafe { wm_scalar_decay_rate(m, 0.0, 40.0, &mut predicted, &mut fitted) },
        WmStatus::Ok
    );
    assert!((predicted - -(0.25 + (0.0625f64 + 0.25).sqrt())).abs() < 1e-12);
    assert!((fitted - predicted).abs() < 1e-2);
    unsafe { wm_model_free(m) };
}

#[test]
fn green_table_and_mass() {
    let m = model(2, 1.0, 1, 1.0);
    let mut table = ptr::null_mut();
    assert_eq!(
        unsafe { wm_green_table_build(m, 64, &mut table) },
        WmStatus::Ok
    );
    let theta = [0.0, 1.0, 2.0];
    let r = [0.5, 0.5, 0.5];
    let mut out = [0.0; 3];
    assert_eq!(
        unsafe { wm_green_evaluate(table, theta.as_ptr(), r.as_ptr(), 3, out.as_mut_ptr()) },
        WmStatus::Ok
    );
    assert!(out.iter().all(|v| *v > 0.0));
    assert!(out[0] > out[1] && out[1] > out[2]);

    // a too-coarse shell is reported, not panicked on
    let (mut mass, mut unc) = (0.0, 0.0);
    assert_eq!(
        unsafe { wm_mass_term(table, 0.02, 0.2, 3, &mut mass, &mut unc) },
        WmStatus::InvalidInput
    );
    assert!(last_error().contains("shell"));
    unsafe { wm_green_table_free(table) };
    unsafe { wm_model_free(m) };
}

#[test]
fn version_is_cargo_version() {
    let v = unsafe { CStr::from_ptr(wm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/warpmass.h"),
    )
    .unwrap();
    for name in [
        "wm_last_error_message",
        "wm_version",
        "wm_model_sphere_hyperbolic",
        "wm_model_free",
        "wm_model_dimension",
        "wm_conditions",
        "wm_scalar_decay_rate",
        "wm_green_table_build",
        "wm_green_table_free",
        "wm_green_evaluate",
        "wm_mass_term",
        "wm_q_star_sphere",
        "typedef struct WmModel WmModel;",
        "WM_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

/// Compiles a small C program against the header and the static library.
#[test]
fn c_program_links_against_staticlib() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let deps = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib_dir = deps.parent().unwrap();
    let lib = lib_dir.join("libwarpmass_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!(
            "skipping: no static library at {} or no C compiler",
            lib.display()
        );
        return;
    }
    let tmp = std::env::temp_dir().join(format!("warpmass_ffi_{}", std::process::id()));
    std::fs::create_dir_all(&tmp).unwrap();
    let src = tmp.join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "warpmass.h"
int main(void) {
    WmModel *m = NULL;
    if (wm_model_sphere_hyperbolic(2, 1.0, 1, 1.0, &m) != WM_STATUS_OK) return 1;
    WmConditions c;
    if (wm_conditions(m, 0.0, &c) != WM_STATUS_OK || !c.all_hypotheses) return 2;
    double q = 0.0;
    if (wm_q_star_sphere(wm_model_dimension(m), &q) != WM_STATUS_OK) return 3;
    wm_model_free(m);
    if (wm_model_sphere_hyperbolic(2, 0.0, 1, 1.0, &m) != WM_STATUS_INVALID_INPUT) return 4;
    char buf[128];
    if (wm_last_error_message(buf, sizeof buf) == 0) return 5;
    printf("%.6f\n", q);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = tmp.join("main");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let run = Command::new(&exe).output().unwrap();
    assert!(
        run.status.success(),
        "C program exited with {:?}",
        run.status
    );
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "61.562392");
    let _ = std::fs::remove_dir_all(&tmp);
}
