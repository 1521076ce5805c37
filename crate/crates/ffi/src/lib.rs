//! C interface to `meanfield-core`.
//!
//! Every entry point returns an [`MfStatus`]. On failure the message is kept
//! per thread and read with [`mf_last_error`]. Objects are opaque handles
//! created by `*_new` / `*_from_toml` and released with the matching
//! `*_free`; strings returned by the library are released with
//! [`mf_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use meanfield_core::lab::{self, ExperimentConfig};
use meanfield_core::transport::{fit_rate, wasserstein, DiscreteMeasure, Solver};
use meanfield_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Numerical = 3,
    Unsupported = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfSolver {
    /// Quantile coupling in one dimension, network simplex otherwise.
    Exact = 0,
    NetworkSimplex = 1,
    Sliced = 2,
}

/// Result of a log-log rate fit `d ≈ C N^(-alpha)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MfRateFit {
    pub alpha_hat: f64,
    pub c_hat: f64,
    pub residual: f64,
    pub slope_std_error: f64,
}

/// Weighted point cloud.
pub struct MfMeasure(DiscreteMeasure);

/// Parsed experiment configuration.
pub struct MfExperiment(ExperimentConfig);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn status_of(e: &Error) -> MfStatus {
    match e {
        _ if e.is_numerical() => MfStatus::Numerical,
        Error::Unsupported(_) | Error::SizeExceeded { .. } => MfStatus::Unsupported,
        Error::Io(_) => MfStatus::Io,
        _ => MfStatus::InvalidInput,
    }
}

fn guard(f: impl FnOnce() -> Result<(), MfStatus>) -> MfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MfStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside meanfield");
            MfStatus::Panic
        }
    }
}

fn fail(e: Error) -> MfStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null(what: &str) -> MfStatus {
    set_error(format!("{what} is null"));
    MfStatus::NullPointer
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], MfStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, MfStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        MfStatus::InvalidInput
    })
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

/// Message of the last failure on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn mf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a measure from `n` points of dimension `dim` (row-major) and `n`
/// weights summing to one. A null `weights` gives equal weights.
///
/// # Safety
/// `points` must hold `n * dim` values and `weights`, if not null, `n`.
#[no_mangle]
pub unsafe extern "C" fn mf_measure_new(
    dim: usize,
    points: *const f64,
    weights: *const f64,
    n: usize,
    out: *mut *mut MfMeasure,
) -> MfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let pts = slice(points, n.saturating_mul(dim), "points")?.to_vec();
        let m = if weights.is_null() {
            DiscreteMeasure::uniform(dim, pts)
        } else {
            DiscreteMeasure::new(dim, pts, slice(weights, n, "weights")?.to_vec())
        }
        .map_err(fail)?;
        *out = Box::into_raw(Box::new(MfMeasure(m)));
        Ok(())
    })
}

/// # Safety
/// `m` must come from [`mf_measure_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mf_measure_free(m: *mut MfMeasure) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of atoms in the measure.
///
/// # Safety
/// `m` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mf_measure_len(m: *const MfMeasure, out: *mut usize) -> MfStatus {
    guard(|| {
        let (Some(m), false) = (m.as_ref(), out.is_null()) else {
            return Err(null("argument"));
        };
        *out = m.0.len();
        Ok(())
    })
}

/// Order-`p` Wasserstein distance, `p` in {1, 2}, with `solver` one of
/// [`MfSolver`]. `directions` and `seed` are used by the sliced solver
/// only; `std_error` may be null and receives NaN for exact solvers.
///
/// # Safety
/// `a` and `b` must be live handles; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mf_wasserstein(
    a: *const MfMeasure,
    b: *const MfMeasure,
    p: u32,
    solver: u32,
    directions: usize,
    seed: u64,
    value: *mut f64,
    std_error: *mut f64,
) -> MfStatus {
    guard(|| {
        let (Some(a), Some(b)) = (a.as_ref(), b.as_ref()) else {
            return Err(null("measure"));
        };
        if value.is_null() {
            return Err(null("value"));
        }
        let solver = match solver {
            s if s == MfSolver::Exact as u32 => Solver::Exact,
            s if s == MfSolver::NetworkSimplex as u32 => Solver::NetworkSimplex,
            s if s == MfSolver::Sliced as u32 => Solver::Sliced { directions, seed },
            other => {
                set_error(format!("unknown solver {other}"));
                return Err(MfStatus::InvalidInput);
            }
        };
        let d = wasserstein(&a.0, &b.0, p, solver).map_err(fail)?;
        *value = d.value;
        if !std_error.is_null() {
            *std_error = d.std_error.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

/// Fits `log d = log C - alpha log N` to `len` pairs.
///
/// # Safety
/// `counts` and `distances` must hold `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mf_fit_rate(
    counts: *const f64,
    distances: *const f64,
    len: usize,
    out: *mut MfRateFit,
) -> MfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let n = slice(counts, len, "counts")?;
        let d = slice(distances, len, "distances")?;
        let pairs: Vec<(f64, f64)> = n.iter().copied().zip(d.iter().copied()).collect();
        let fit = fit_rate(&pairs).map_err(fail)?;
        *out = MfRateFit {
            alpha_hat: fit.alpha_hat,
            c_hat: fit.c_hat,
            residual: fit.residual,
            slope_std_error: fit.slope_std_error,
        };
        Ok(())
    })
}

/// Parses and validates a TOML experiment config. A relative `output_dir`
/// is taken relative to the working directory.
///
/// # Safety
/// `toml` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mf_experiment_from_toml(toml: *const c_char, out: *mut *mut MfExperiment) -> MfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let cfg = ExperimentConfig::from_toml(text(toml, "toml")?).map_err(fail)?;
        cfg.validate().map_err(fail)?;
        *out = Box::into_raw(Box::new(MfExperiment(cfg)));
        Ok(())
    })
}

/// Replaces the output directory of a parsed experiment.
///
/// # Safety
/// `e` must be a live handle and `dir` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mf_experiment_set_output_dir(e: *mut MfExperiment, dir: *const c_char) -> MfStatus {
    guard(|| {
        let Some(e) = e.as_mut() else {
            return Err(null("experiment"));
        };
        e.0.output_dir = text(dir, "dir")?.into();
        Ok(())
    })
}

/// Runs the experiment and hands back its summary as a JSON string, to be
/// released with [`mf_string_free`]. `summary` may be null.
///
/// # Safety
/// `e` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mf_experiment_run(e: *const MfExperiment, summary: *mut *mut c_char) -> MfStatus {
    guard(|| {
        let Some(e) = e.as_ref() else {
            return Err(null("experiment"));
        };
        if !summary.is_null() {
            *summary = ptr::null_mut();
        }
        let outcome = lab::run(&e.0).map_err(fail)?;
        if !summary.is_null() {
            *summary = into_c_string(outcome.summary.to_string());
        }
        Ok(())
    })
}

/// # Safety
/// `e` must come from [`mf_experiment_from_toml`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mf_experiment_free(e: *mut MfExperiment) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// # Safety
/// `s` must be a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn mf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
