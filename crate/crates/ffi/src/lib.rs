//! C interface to the `sdbf` library.
//!
//! Models and results are opaque handles owned by the caller and released
//! with their `_free` function. Every fallible call returns an
//! [`SdbfStatus`]; on failure a message is available from
//! [`sdbf_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sdbf::engine::EngineConfig;
use sdbf::input::{Model, StatsInput};
use sdbf::report::{analyze, render_json, render_text, ResultDocument};
use sdbf::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdbfStatus {
    Ok = 0,
    NullPointer = 1,
    /// Hypothesis syntax error, or infeasible or redundant constraints.
    Parse = 2,
    /// Bad input data or arguments, or an unsupported request.
    Data = 3,
    Numerical = 4,
    OutOfRange = 5,
    Panic = 6,
}

/// A model built from sufficient statistics.
pub struct SdbfModel {
    model: Model,
}

/// The outcome of an analysis.
pub struct SdbfResult {
    doc: ResultDocument,
}

thread_local! {
    static LAST_ERROR: RefCell<(CString, i64)> = RefCell::new((CString::default(), -1));
}

fn set_error(msg: &str, position: Option<usize>) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = (c, position.map_or(-1, |p| p as i64)));
}

fn fail(e: &Error) -> SdbfStatus {
    let position = match e {
        Error::Parse(p) => p.position,
        _ => None,
    };
    set_error(&e.to_string(), position);
    match e.exit_code() {
        2 => SdbfStatus::Parse,
        4 => SdbfStatus::Numerical,
        _ => SdbfStatus::Data,
    }
}

/// Runs `f`, turning panics into [`SdbfStatus::Panic`].
fn guard(f: impl FnOnce() -> SdbfStatus) -> SdbfStatus {
    set_error("", None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal error", None);
            SdbfStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, SdbfStatus> {
    if p.is_null() {
        set_error("null pointer argument", None);
        return Err(SdbfStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8", None);
        SdbfStatus::Data
    })
}

/// Message for the last failed call on this thread; empty after success.
/// The pointer stays valid until the next call into this library.
#[no_mangle]
pub extern "C" fn sdbf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().0.as_ptr())
}

/// Byte offset of the last hypothesis syntax error, or -1.
#[no_mangle]
pub extern "C" fn sdbf_last_error_position() -> i64 {
    LAST_ERROR.with(|e| e.borrow().1)
}

/// Builds a model from a sufficient-statistics JSON document. `null_value`
/// overrides the t-test null value unless it is NaN.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdbf_model_from_json(
    json: *const c_char,
    null_value: f64,
    out: *mut *mut SdbfModel,
) -> SdbfStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer", None);
            return SdbfStatus::NullPointer;
        }
        *out = ptr::null_mut();
        let text = match str_arg(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let null = (!null_value.is_nan()).then_some(null_value);
        match text.parse::<StatsInput>().and_then(|s| s.build(null)) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(SdbfModel { model }));
                SdbfStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `model` must come from [`sdbf_model_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sdbf_model_free(model: *mut SdbfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of parameters, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sdbf_model_param_count(model: *const SdbfModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.family().space().len())
}

/// Copies the name of parameter `index` into a new string, released with
/// [`sdbf_string_free`].
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdbf_model_param_name(
    model: *const SdbfModel,
    index: usize,
    out: *mut *mut c_char,
) -> SdbfStatus {
    guard(|| {
        let (Some(m), false) = (model.as_ref(), out.is_null()) else {
            set_error("null pointer argument", None);
            return SdbfStatus::NullPointer;
        };
        let space = m.model.family().space();
        if index >= space.len() {
            set_error("parameter index out of range", None);
            return SdbfStatus::OutOfRange;
        }
        *out = CString::new(space.name(index)).unwrap_or_default().into_raw();
        SdbfStatus::Ok
    })
}

/// Runs the exploratory tests and, if `hypothesis` is not null, the
/// confirmatory test. `prior` may be null for equal prior weights.
/// `n_draws` of 0 selects the default.
///
/// # Safety
/// `model` must be a live handle, `hypothesis` null or a NUL-terminated
/// string, `prior` null or valid for `n_prior` reads, and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sdbf_analyze(
    model: *const SdbfModel,
    hypothesis: *const c_char,
    prior: *const f64,
    n_prior: usize,
    seed: u64,
    n_draws: usize,
    out: *mut *mut SdbfResult,
) -> SdbfStatus {
    guard(|| {
        let (Some(m), false) = (model.as_ref(), out.is_null()) else {
            set_error("null pointer argument", None);
            return SdbfStatus::NullPointer;
        };
        *out = ptr::null_mut();
        let h = if hypothesis.is_null() {
            None
        } else {
            match str_arg(hypothesis) {
                Ok(t) => Some(t),
                Err(s) => return s,
            }
        };
        let weights = (!prior.is_null()).then(|| std::slice::from_raw_parts(prior, n_prior));
        let mut cfg = EngineConfig { seed, ..EngineConfig::default() };
        if n_draws > 0 {
            cfg.n_draws = n_draws;
        }
        match analyze(std::slice::from_ref(&m.model), h, weights, &cfg) {
            Ok(doc) => {
                *out = Box::into_raw(Box::new(SdbfResult { doc }));
                SdbfStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `result` must come from [`sdbf_analyze`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sdbf_result_free(result: *mut SdbfResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of confirmatory hypotheses including any complement; 0 when no
/// hypothesis was given.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sdbf_result_hypothesis_count(result: *const SdbfResult) -> usize {
    result.as_ref().and_then(|r| r.doc.confirmatory.as_ref()).map_or(0, |c| c.hypotheses.len())
}

/// Posterior probability and Bayes factor against the unconstrained model
/// of confirmatory hypothesis `index`.
///
/// # Safety
/// `result` must be a live handle; `php` and `bf` valid or null.
#[no_mangle]
pub unsafe extern "C" fn sdbf_result_hypothesis(
    result: *const SdbfResult,
    index: usize,
    php: *mut f64,
    bf: *mut f64,
) -> SdbfStatus {
    guard(|| {
        let Some(r) = result.as_ref() else {
            set_error("null pointer argument", None);
            return SdbfStatus::NullPointer;
        };
        let Some(h) = r.doc.confirmatory.as_ref().and_then(|c| c.hypotheses.get(index)) else {
            set_error("hypothesis index out of range", None);
            return SdbfStatus::OutOfRange;
        };
        if !php.is_null() {
            *php = h.php.0;
        }
        if !bf.is_null() {
            *bf = h.bf.0;
        }
        SdbfStatus::Ok
    })
}

/// Renders the result as JSON (`as_json` nonzero) or as text tables. The
/// string is released with [`sdbf_string_free`].
///
/// # Safety
/// `result` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sdbf_result_render(
    result: *const SdbfResult,
    as_json: i32,
    out: *mut *mut c_char,
) -> SdbfStatus {
    guard(|| {
        let (Some(r), false) = (result.as_ref(), out.is_null()) else {
            set_error("null pointer argument", None);
            return SdbfStatus::NullPointer;
        };
        let s = if as_json != 0 { render_json(&r.doc) } else { render_text(&r.doc) };
        *out = CString::new(s).unwrap_or_default().into_raw();
        SdbfStatus::Ok
    })
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn sdbf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
