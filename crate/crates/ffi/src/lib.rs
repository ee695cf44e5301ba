//! C ABI over `mfg-core`.
//!
//! Configs and runs are opaque heap handles released with their `_free`
//! function. Every fallible call returns an [`MfgStatus`]; on failure the
//! message is available from [`mfg_last_error_message`] on the same thread
//! until the next failing call.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mfg_core::cli_io::{self, RunArtifacts, RunConfig};
use mfg_core::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    ValidationError = 4,
    IoError = 5,
    InvalidArgument = 6,
    NumericalError = 7,
    OutOfRange = 8,
    Panic = 9,
}

/// Resolved run configuration.
pub struct MfgConfig {
    inner: RunConfig,
}

/// Finished run with all artifacts.
pub struct MfgRun {
    inner: RunArtifacts,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &Error) -> MfgStatus {
    match e {
        Error::Parse { .. } => MfgStatus::ParseError,
        Error::Validation(_) => MfgStatus::ValidationError,
        Error::Io { .. } => MfgStatus::IoError,
        Error::InvalidInput(_) | Error::InvalidDensity(_) => MfgStatus::InvalidArgument,
        Error::LambertDomain { .. }
        | Error::EmptyCosts
        | Error::NonFiniteCost { .. }
        | Error::Bracketing(_)
        | Error::EmptyPopulation => MfgStatus::NumericalError,
    }
}

struct Failure(MfgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MfgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MfgStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MfgStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(MfgStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(MfgStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn run_ref<'a>(run: *const MfgRun) -> Result<&'a RunArtifacts, Failure> {
    run.as_ref().map(|r| &r.inner).ok_or_else(|| null("run"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mfg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failing call on this thread, or null. The pointer is
/// valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn mfg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses the config file at `path`.
#[no_mangle]
pub unsafe extern "C" fn mfg_config_from_file(
    path: *const c_char,
    out: *mut *mut MfgConfig,
) -> MfgStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        let inner = RunConfig::from_file(Path::new(path))?;
        put(out, Box::into_raw(Box::new(MfgConfig { inner })))
    })
}

/// Parses config text.
#[no_mangle]
pub unsafe extern "C" fn mfg_config_from_str(
    text: *const c_char,
    out: *mut *mut MfgConfig,
) -> MfgStatus {
    guard(|| {
        let text = c_str(text, "text")?;
        let inner = RunConfig::parse(text)?;
        put(out, Box::into_raw(Box::new(MfgConfig { inner })))
    })
}

#[no_mangle]
pub unsafe extern "C" fn mfg_config_set_seed(config: *mut MfgConfig, seed: u64) -> MfgStatus {
    guard(|| {
        let cfg = config.as_mut().ok_or_else(|| null("config"))?;
        cfg.inner.seed = seed;
        Ok(())
    })
}

/// Threads for the parallel diagnostics; 0 lets the library decide.
#[no_mangle]
pub unsafe extern "C" fn mfg_config_set_workers(
    config: *mut MfgConfig,
    workers: usize,
) -> MfgStatus {
    guard(|| {
        let cfg = config.as_mut().ok_or_else(|| null("config"))?;
        cfg.inner.workers = workers;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn mfg_config_free(config: *mut MfgConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Solves the configuration. A run that did not converge still succeeds;
/// query it with [`mfg_run_converged`].
#[no_mangle]
pub unsafe extern "C" fn mfg_run(config: *const MfgConfig, out: *mut *mut MfgRun) -> MfgStatus {
    guard(|| {
        let cfg = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let inner = cli_io::execute(&cfg.inner)?;
        put(out, Box::into_raw(Box::new(MfgRun { inner })))
    })
}

#[no_mangle]
pub unsafe extern "C" fn mfg_run_converged(run: *const MfgRun, out: *mut bool) -> MfgStatus {
    guard(|| put(out, run_ref(run)?.converged()))
}

/// Whether the equilibrium verification of the run passed.
#[no_mangle]
pub unsafe extern "C" fn mfg_run_verified(run: *const MfgRun, out: *mut bool) -> MfgStatus {
    guard(|| put(out, run_ref(run)?.solution.verification.passed()))
}

/// Number of sweeps of the main run.
#[no_mangle]
pub unsafe extern "C" fn mfg_run_sweeps(run: *const MfgRun, out: *mut usize) -> MfgStatus {
    guard(|| put(out, run_ref(run)?.solution.run.reports.len()))
}

/// Modification count of sweep `sweep` (1-based) of the main run.
#[no_mangle]
pub unsafe extern "C" fn mfg_run_modifications(
    run: *const MfgRun,
    sweep: usize,
    out: *mut usize,
) -> MfgStatus {
    guard(|| {
        let reports = &run_ref(run)?.solution.run.reports;
        let r = sweep
            .checked_sub(1)
            .and_then(|i| reports.get(i))
            .ok_or_else(|| {
                Failure(
                    MfgStatus::OutOfRange,
                    format!("sweep {sweep} out of range 1..={}", reports.len()),
                )
            })?;
        put(out, r.modifications)
    })
}

/// Number of time steps; mass values exist for indices `0..=n_steps`.
#[no_mangle]
pub unsafe extern "C" fn mfg_run_n_steps(run: *const MfgRun, out: *mut usize) -> MfgStatus {
    guard(|| put(out, run_ref(run)?.mass.len() - 1))
}

/// Total mass in the domain at time index `step`.
#[no_mangle]
pub unsafe extern "C" fn mfg_run_mass(run: *const MfgRun, step: usize, out: *mut f64) -> MfgStatus {
    guard(|| {
        let mass = &run_ref(run)?.mass;
        let row = mass.get(step).ok_or_else(|| {
            Failure(
                MfgStatus::OutOfRange,
                format!("step {step} out of range 0..{}", mass.len()),
            )
        })?;
        put(out, row.total_mass)
    })
}

/// Writes the run's artifacts into directory `dir`.
#[no_mangle]
pub unsafe extern "C" fn mfg_run_write_outputs(
    run: *const MfgRun,
    dir: *const c_char,
) -> MfgStatus {
    guard(|| {
        let art = run_ref(run)?;
        let dir = c_str(dir, "dir")?;
        cli_io::write_outputs(art, Path::new(dir))?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn mfg_run_free(run: *mut MfgRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Principal branch of the Lambert W function.
#[no_mangle]
pub unsafe extern "C" fn mfg_lambert_w0(x: f64, out: *mut f64) -> MfgStatus {
    guard(|| {
        let w = mfg_core::math::lambert_w0(x)?;
        put(out, w)
    })
}
