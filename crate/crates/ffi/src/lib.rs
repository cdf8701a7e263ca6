//! C ABI for the NLI estimation pipeline.
//!
//! Usage pattern: parse a TOML link description into an opaque handle,
//! query channel metadata, run the closed form or the numeric oracle into
//! caller-owned buffers, free the handle. Every entry point returns an
//! [`RnliStatus`]; on failure `rnli_last_error_message` returns a
//! thread-local, NUL-terminated description that stays valid until the
//! next failing call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use raman_nli::engine::{total_nli, MlFactors};
use raman_nli::fitter::fit_link;
use raman_nli::oracle::{nli_numeric, OracleMode};
use raman_nli::solver::propagate_link;
use raman_nli::{config, Error, LinkSpec};

/// Status codes; nonzero means failure. Values match the CLI exit codes
/// where one exists.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RnliStatus {
    Ok = 0,
    InvalidArgument = 1,
    ConfigError = 2,
    SolverError = 3,
    QuadratureError = 4,
    FitError = 5,
    EngineError = 6,
    InternalError = 7,
}

/// Oracle squaring mode.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RnliOracleMode {
    Exact = 0,
    Split = 1,
}

/// Opaque, immutable link handle.
pub struct RnliLink {
    link: LinkSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> RnliStatus {
    match err {
        Error::Config(_) => RnliStatus::ConfigError,
        Error::Solver(_) => RnliStatus::SolverError,
        Error::Quadrature(_) => RnliStatus::QuadratureError,
        Error::Fit(_) => RnliStatus::FitError,
        Error::Engine(_) => RnliStatus::EngineError,
    }
}

fn guarded<F: FnOnce() -> RnliStatus>(f: F) -> RnliStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            RnliStatus::InternalError
        }
    }
}

/// Library version as a static NUL-terminated string; never freed.
#[no_mangle]
pub extern "C" fn rnli_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the most recent failure on this thread.
#[no_mangle]
pub extern "C" fn rnli_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Parse and validate a TOML link description.
///
/// On success writes a heap-allocated handle into `out_link`; release it
/// with [`rnli_link_free`].
///
/// # Safety
/// `config_toml` must point to a NUL-terminated UTF-8 string and
/// `out_link` to writable storage for one pointer; both must stay valid
/// for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn rnli_link_parse(
    config_toml: *const c_char,
    out_link: *mut *mut RnliLink,
) -> RnliStatus {
    guarded(|| {
        if config_toml.is_null() || out_link.is_null() {
            set_error("null argument");
            return RnliStatus::InvalidArgument;
        }
        let text = match unsafe { CStr::from_ptr(config_toml) }.to_str() {
            Ok(t) => t,
            Err(_) => {
                set_error("config text is not valid UTF-8");
                return RnliStatus::InvalidArgument;
            }
        };
        match config::load_link_from_str(text) {
            Ok(link) => {
                let handle = Box::new(RnliLink { link });
                unsafe { *out_link = Box::into_raw(handle) };
                RnliStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                RnliStatus::ConfigError
            }
        }
    })
}

/// Release a handle returned by [`rnli_link_parse`]; a null pointer is a
/// no-op.
///
/// # Safety
/// `link` must be null or a pointer previously returned by
/// [`rnli_link_parse`] that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn rnli_link_free(link: *mut RnliLink) {
    if !link.is_null() {
        drop(unsafe { Box::from_raw(link) });
    }
}

/// Number of WDM channels in the link; 0 for a null handle.
///
/// # Safety
/// `link` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn rnli_link_channel_count(link: *const RnliLink) -> usize {
    if link.is_null() {
        return 0;
    }
    unsafe { &*link }.link.channels.len()
}

unsafe fn fill_slice<'a>(
    out: *mut f64,
    len: usize,
    expected: usize,
) -> Result<&'a mut [f64], RnliStatus> {
    if out.is_null() {
        set_error("null output buffer");
        return Err(RnliStatus::InvalidArgument);
    }
    if len < expected {
        set_error("output buffer shorter than the channel count");
        return Err(RnliStatus::InvalidArgument);
    }
    Ok(unsafe { std::slice::from_raw_parts_mut(out, expected) })
}

/// Channel center frequencies in Hz, ascending.
///
/// # Safety
/// `link` must be a valid handle and `out` must point to at least `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rnli_link_channel_frequencies(
    link: *const RnliLink,
    out: *mut f64,
    len: usize,
) -> RnliStatus {
    guarded(|| {
        if link.is_null() {
            set_error("null link handle");
            return RnliStatus::InvalidArgument;
        }
        let spec = &unsafe { &*link }.link;
        let slice = match unsafe { fill_slice(out, len, spec.channels.len()) } {
            Ok(s) => s,
            Err(status) => return status,
        };
        for (dst, ch) in slice.iter_mut().zip(spec.channels.iter()) {
            *dst = ch.center_frequency;
        }
        RnliStatus::Ok
    })
}

/// Run solve → fit → closed form and write per-channel NLI power (W) at
/// the link end into `out`, ordered like the channel frequencies.
///
/// # Safety
/// `link` must be a valid handle and `out` must point to at least `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rnli_compute_nli(
    link: *const RnliLink,
    out: *mut f64,
    len: usize,
) -> RnliStatus {
    guarded(|| {
        if link.is_null() {
            set_error("null link handle");
            return RnliStatus::InvalidArgument;
        }
        let spec = &unsafe { &*link }.link;
        let slice = match unsafe { fill_slice(out, len, spec.channels.len()) } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let run = || -> Result<Vec<f64>, Error> {
            let solution = propagate_link(spec)?;
            let fits = fit_link(spec, &solution)?;
            let ml = MlFactors::uniform(spec.spans.len(), spec.channels.len(), spec.engine.rho)?;
            let report = total_nli(spec, &solution, &fits, &ml)?;
            Ok(report.channels.iter().map(|c| c.total_w).collect())
        };
        match run() {
            Ok(values) => {
                slice.copy_from_slice(&values);
                RnliStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Run the numeric GN-integral oracle and write per-channel NLI power (W)
/// into `out`.
///
/// # Safety
/// `link` must be a valid handle and `out` must point to at least `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rnli_compute_oracle(
    link: *const RnliLink,
    mode: RnliOracleMode,
    out: *mut f64,
    len: usize,
) -> RnliStatus {
    guarded(|| {
        if link.is_null() {
            set_error("null link handle");
            return RnliStatus::InvalidArgument;
        }
        let spec = &unsafe { &*link }.link;
        let slice = match unsafe { fill_slice(out, len, spec.channels.len()) } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let mut spec = spec.clone();
        spec.oracle.mode = match mode {
            RnliOracleMode::Exact => OracleMode::Exact,
            RnliOracleMode::Split => OracleMode::Split,
        };
        let run = || -> Result<Vec<f64>, Error> {
            let solution = propagate_link(&spec)?;
            let fits = fit_link(&spec, &solution)?;
            let ml = MlFactors::uniform(spec.spans.len(), spec.channels.len(), spec.engine.rho)?;
            let report = nli_numeric(&spec, &solution, Some(&fits), &ml)?;
            Ok(report.channels.iter().map(|c| c.total_w).collect())
        };
        match run() {
            Ok(values) => {
                slice.copy_from_slice(&values);
                RnliStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}
