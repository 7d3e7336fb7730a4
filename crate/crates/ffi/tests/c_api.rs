use std::ffi::{c_char, CString};
use std::ptr;
use stokes_shape_spectra_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0u8; 256];
    let n = unsafe { sss_last_error_message(buf.as_mut_ptr() as *mut c_char, buf.len()) };
    buf.truncate(n.min(buf.len()) - 1);
    String::from_utf8(buf).unwrap()
}

#[test]
fn config_round_trip_and_dimension() {
    let src = CString::new("[mesh]\nnodes = 50\n").unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { sss_config_parse(src.as_ptr(), &mut cfg) }, SssStatus::Ok);
    let mut disc = ptr::null_mut();
    assert_eq!(unsafe { sss_discretization_new(cfg, 0.0, &mut disc) }, SssStatus::Ok);
    let mut dim = 0usize;
    assert_eq!(unsafe { sss_discretization_dim(disc, &mut dim) }, SssStatus::Ok);
    assert_eq!(dim, 3 * 25);
    let mut s = 0.0;
    assert_eq!(unsafe { sss_sigma_min(disc, 10.0, &mut s) }, SssStatus::Ok);
    assert!(s > 0.0);
    assert_eq!(unsafe { sss_sigma_min(disc, -1.0, &mut s) }, SssStatus::InvalidArgument);
    unsafe {
        sss_discretization_free(disc);
        sss_config_free(cfg);
    }
}

#[test]
fn config_errors_are_reported() {
    let src = CString::new("[mesh]\nnodes = -3\n").unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { sss_config_parse(src.as_ptr(), &mut cfg) }, SssStatus::Config);
    assert!(cfg.is_null());
    assert!(last_error().contains("line 2"), "{}", last_error());
}

#[test]
fn null_arguments_are_rejected() {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { sss_config_parse(ptr::null(), &mut cfg) }, SssStatus::NullPointer);
    let mut dim = 0usize;
    assert_eq!(unsafe { sss_discretization_dim(ptr::null(), &mut dim) }, SssStatus::NullPointer);
    unsafe { sss_config_free(ptr::null_mut()) };
}

#[test]
fn bessel_zero_matches_known_value() {
    let mut z = 0.0;
    assert_eq!(unsafe { sss_bessel_zero(1, 1, &mut z) }, SssStatus::Ok);
    assert!((z - 4.493409457909064).abs() < 1e-12);
    assert_eq!(unsafe { sss_bessel_zero(1, 0, &mut z) }, SssStatus::Solver);
}

#[test]
fn unknown_stage_is_invalid() {
    let src = CString::new("").unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { sss_config_parse(src.as_ptr(), &mut cfg) }, SssStatus::Ok);
    let stage = CString::new("plot").unwrap();
    let mut code = 0;
    assert_eq!(unsafe { sss_run_stage(cfg, stage.as_ptr(), ptr::null(), &mut code) }, SssStatus::InvalidArgument);
    unsafe { sss_config_free(cfg) };
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/stokes_shape_spectra.h")).unwrap();
    for name in [
        "sss_last_error_message",
        "sss_version",
        "sss_config_parse",
        "sss_config_free",
        "sss_discretization_new",
        "sss_discretization_free",
        "sss_discretization_dim",
        "sss_sigma_min",
        "sss_find_eigen",
        "sss_bessel_zero",
        "sss_run_stage",
        "typedef struct SssConfig SssConfig",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(status) = std::process::Command::new("cc")
        .args(["-std=c99", "-fsyntax-only", "-x", "c", concat!(env!("CARGO_MANIFEST_DIR"), "/include/stokes_shape_spectra.h")])
        .status()
    else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    assert!(status.success());
}
