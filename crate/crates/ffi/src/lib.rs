//! C ABI over the solver.
//!
//! Every function returns an [`SssStatus`]; on failure the message is kept in
//! a thread-local slot readable with [`sss_last_error_message`]. Handles are
//! opaque and must be released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use stokes_shape_spectra::config::RunConfig;
use stokes_shape_spectra::layer::Discretization;
use stokes_shape_spectra::pipeline::{run_config, Stage};
use stokes_shape_spectra::{oracles, spectral, Error};

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SssStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Solver = 4,
    Panic = 5,
}

/// Parsed run configuration.
pub struct SssConfig {
    inner: RunConfig,
}

/// Discretized single-layer operator at a fixed δ.
pub struct SssDiscretization {
    inner: Discretization,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> SssStatus {
    match err {
        Error::Config(_) => SssStatus::Config,
        Error::InvalidInput(_) | Error::DeltaOutOfRange { .. } => SssStatus::InvalidArgument,
        _ => SssStatus::Solver,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (SssStatus, String)>) -> SssStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SssStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside the solver".into());
            SssStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (SssStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SssStatus, String) {
    (SssStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (SssStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (SssStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length including the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sss_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sss_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parses a TOML configuration document.
///
/// # Safety
/// `source` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sss_config_parse(source: *const c_char, out: *mut *mut SssConfig) -> SssStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let src = str_arg(source, "source")?;
        let inner = RunConfig::parse(src).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(SssConfig { inner }));
        Ok(())
    })
}

/// Releases a configuration handle. Null is ignored.
///
/// # Safety
/// `cfg` must come from [`sss_config_parse`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sss_config_free(cfg: *mut SssConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Builds the discretization of the configured surface at perturbation amplitude `delta`.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sss_discretization_new(cfg: *const SssConfig, delta: f64, out: *mut *mut SssDiscretization) -> SssStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let c = &cfg.inner;
        let inner = Discretization::new(c.surface.clone(), c.rho.clone(), delta, c.layer_options()).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(SssDiscretization { inner }));
        Ok(())
    })
}

/// Releases a discretization handle. Null is ignored.
///
/// # Safety
/// `disc` must come from [`sss_discretization_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sss_discretization_free(disc: *mut SssDiscretization) {
    if !disc.is_null() {
        drop(Box::from_raw(disc));
    }
}

/// Number of unknowns of the discrete operator.
///
/// # Safety
/// `disc` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sss_discretization_dim(disc: *const SssDiscretization, out: *mut usize) -> SssStatus {
    guard(|| {
        let d = disc.as_ref().ok_or_else(|| null("disc"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = d.inner.dim();
        Ok(())
    })
}

/// Smallest singular value of the operator at real `lambda`.
///
/// # Safety
/// `disc` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sss_sigma_min(disc: *const SssDiscretization, lambda: f64, out: *mut f64) -> SssStatus {
    guard(|| {
        let d = disc.as_ref().ok_or_else(|| null("disc"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if !(lambda > 0.0) {
            return Err((SssStatus::InvalidArgument, format!("lambda must be positive, got {lambda}")));
        }
        *out = spectral::sigma_min(&d.inner, lambda).map_err(lib_err)?;
        Ok(())
    })
}

/// Locates the eigenvalue inside `[lo, hi]` and its multiplicity.
///
/// # Safety
/// `disc` must be a live handle; `lambda` and `multiplicity` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sss_find_eigen(
    disc: *const SssDiscretization,
    lo: f64,
    hi: f64,
    lambda: *mut f64,
    multiplicity: *mut usize,
) -> SssStatus {
    guard(|| {
        let d = disc.as_ref().ok_or_else(|| null("disc"))?;
        let lambda = lambda.as_mut().ok_or_else(|| null("lambda"))?;
        let multiplicity = multiplicity.as_mut().ok_or_else(|| null("multiplicity"))?;
        if !(lo > 0.0 && hi > lo) {
            return Err((SssStatus::InvalidArgument, format!("invalid bracket [{lo}, {hi}]")));
        }
        let r = spectral::find_eigen(&d.inner, (lo, hi)).map_err(lib_err)?;
        *lambda = r.lambda;
        *multiplicity = r.multiplicity;
        Ok(())
    })
}

/// `s`-th positive zero of the spherical Bessel function `j_n`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sss_bessel_zero(n: usize, s: usize, out: *mut f64) -> SssStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = oracles::bessel_zero(n, s).map_err(lib_err)?;
        Ok(())
    })
}

/// Runs a pipeline stage (`validate-kernels`, `scan`, `solve`, `perturb`,
/// `full`) and stores the CLI exit code in `exit_code`.
///
/// # Safety
/// `cfg` must be a live handle, `stage` a NUL-terminated string, `out_dir`
/// null or NUL-terminated, and `exit_code` writable.
#[no_mangle]
pub unsafe extern "C" fn sss_run_stage(
    cfg: *const SssConfig,
    stage: *const c_char,
    out_dir: *const c_char,
    exit_code: *mut i32,
) -> SssStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let exit_code = exit_code.as_mut().ok_or_else(|| null("exit_code"))?;
        let stage = match str_arg(stage, "stage")? {
            "validate-kernels" => Stage::ValidateKernels,
            "scan" => Stage::Scan,
            "solve" => Stage::Solve,
            "perturb" => Stage::Perturb,
            "full" => Stage::Full,
            other => return Err((SssStatus::InvalidArgument, format!("unknown stage {other:?}"))),
        };
        let out = if out_dir.is_null() { None } else { Some(PathBuf::from(str_arg(out_dir, "out_dir")?)) };
        *exit_code = run_config(stage, cfg.inner.clone(), out);
        Ok(())
    })
}
