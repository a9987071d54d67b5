//! Exercises the C ABI end to end: handle lifecycle, status-code mapping
//! for each failure class, the error slot, and the generated header.

use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use geosmooth_ffi::{
    gs_case_builtin, gs_case_free, gs_case_from_str, gs_case_open, gs_case_set_output_dir,
    gs_last_error, gs_run, gs_verify, GsCase, GsStatus,
};
use tempfile::TempDir;

fn last_error() -> String {
    unsafe { CStr::from_ptr(gs_last_error()) }
        .to_str()
        .unwrap()
        .to_string()
}

fn c(text: &str) -> CString {
    CString::new(text).unwrap()
}

fn block_case_text(out_dir: &Path, strength: &str, pressure: f64) -> CString {
    c(&format!(
        "case block\n\
         driver static\n\
         mesh generator rectangle width=1 height=1 nx=2 ny=2\n\
         material soil\n  e 1e7\n  nu 0.3\n{strength}end\n\
         fix bottom xy\n\
         load pressure top {pressure}\n\
         schedule increments 2\n\
         output\n  directory {}\nend\n",
        out_dir.display()
    ))
}

#[test]
fn builtin_biaxial_runs_into_a_redirected_directory() {
    let dir = TempDir::new().unwrap();
    let mut case: *mut GsCase = ptr::null_mut();
    unsafe {
        assert_eq!(gs_case_builtin(c("biaxial").as_ptr(), &mut case), GsStatus::Ok);
        assert!(!case.is_null());
        let out_dir = c(dir.path().to_str().unwrap());
        assert_eq!(gs_case_set_output_dir(case, out_dir.as_ptr()), GsStatus::Ok);
        assert_eq!(gs_run(case), GsStatus::Ok, "{}", last_error());
        gs_case_free(case);
    }
    assert!(last_error().is_empty());
    assert!(dir.path().join("run.log").is_file());
    let wrote_vtk = std::fs::read_dir(dir.path())
        .unwrap()
        .any(|e| e.unwrap().path().extension().is_some_and(|x| x == "vtk"));
    assert!(wrote_vtk, "run left no VTK files behind");
}

#[test]
fn case_file_on_disk_opens_and_runs() {
    let dir = TempDir::new().unwrap();
    let text = block_case_text(&dir.path().join("out"), "", 1e4);
    let path = dir.path().join("block.case");
    std::fs::write(&path, text.to_bytes()).unwrap();
    let mut case: *mut GsCase = ptr::null_mut();
    unsafe {
        let c_path = c(path.to_str().unwrap());
        assert_eq!(gs_case_open(c_path.as_ptr(), &mut case), GsStatus::Ok);
        assert_eq!(gs_run(case), GsStatus::Ok, "{}", last_error());
        gs_case_free(case);
    }
    assert!(dir.path().join("out").join("fields.vtk").is_file());
}

#[test]
fn overload_maps_to_non_convergence() {
    let dir = TempDir::new().unwrap();
    let text = block_case_text(
        &dir.path().join("out"),
        "  c 1e3\n  phi_deg 0\n  psi_deg 0\n",
        1e6,
    );
    let mut case: *mut GsCase = ptr::null_mut();
    unsafe {
        assert_eq!(gs_case_from_str(text.as_ptr(), &mut case), GsStatus::Ok);
        assert_eq!(gs_run(case), GsStatus::NonConvergence);
        gs_case_free(case);
    }
    assert!(!last_error().is_empty(), "non-convergence should leave a message");
}

#[test]
fn malformed_case_text_maps_to_config_error() {
    let mut case: *mut GsCase = ptr::null_mut();
    unsafe {
        let text = c("case broken\ndriver nonsense\n");
        assert_eq!(gs_case_from_str(text.as_ptr(), &mut case), GsStatus::ConfigError);
        assert!(case.is_null());
    }
    assert!(last_error().contains("unknown driver"), "got: {}", last_error());
}

#[test]
fn unknown_builtin_maps_to_config_error() {
    let mut case: *mut GsCase = ptr::null_mut();
    unsafe {
        assert_eq!(
            gs_case_builtin(c("dam_break").as_ptr(), &mut case),
            GsStatus::ConfigError
        );
        assert!(case.is_null());
    }
    assert!(!last_error().is_empty());
}

#[test]
fn missing_case_file_maps_to_error() {
    let mut case: *mut GsCase = ptr::null_mut();
    unsafe {
        let path = c("/nonexistent/geosmooth.case");
        assert_eq!(gs_case_open(path.as_ptr(), &mut case), GsStatus::Error);
        assert!(case.is_null());
    }
    assert!(!last_error().is_empty());
}

#[test]
fn null_arguments_are_reported_not_fatal() {
    let mut case: *mut GsCase = ptr::null_mut();
    unsafe {
        assert_eq!(
            gs_case_builtin(ptr::null(), &mut case),
            GsStatus::InvalidArgument
        );
        assert!(last_error().contains("null"), "got: {}", last_error());
        assert!(case.is_null());
        assert_eq!(
            gs_case_builtin(c("biaxial").as_ptr(), ptr::null_mut()),
            GsStatus::InvalidArgument
        );
        assert_eq!(gs_run(ptr::null()), GsStatus::InvalidArgument);
        assert!(!last_error().is_empty());
        assert_eq!(
            gs_case_set_output_dir(ptr::null_mut(), c("out").as_ptr()),
            GsStatus::InvalidArgument
        );
        gs_case_free(ptr::null_mut());
    }
}

#[test]
fn verify_battery_passes_through_the_abi() {
    assert_eq!(gs_verify(), GsStatus::Ok, "{}", last_error());
}

#[test]
fn generated_header_covers_the_api() {
    let header = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/include/geosmooth.h"
    ))
    .unwrap();
    for needle in [
        "typedef struct GsCase GsCase",
        "GS_STATUS_OK = 0",
        "GS_STATUS_NON_CONVERGENCE = 2",
        "GS_STATUS_CONFIG_ERROR = 3",
        "gs_case_open",
        "gs_case_from_str",
        "gs_case_builtin",
        "gs_case_set_output_dir",
        "gs_case_free",
        "gs_run",
        "gs_verify",
        "gs_last_error",
    ] {
        assert!(header.contains(needle), "header is missing `{needle}`");
    }
}
