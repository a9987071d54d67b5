//! C ABI for the geosmooth solver.
//!
//! The surface is deliberately small: a case file is opened (from a path,
//! a string, or the built-in benchmark set) into an opaque [`GsCase`]
//! handle, optionally redirected to a different output directory, and run.
//! Every entry point returns a [`GsStatus`]; on anything other than
//! `GS_STATUS_OK` a human-readable message is available from
//! [`gs_last_error`] until the next call on the same thread.
//!
//! Status codes mirror the CLI exit codes (0 success, 2 non-convergence,
//! 3 configuration error) so a process embedding the library and a shell
//! script driving the binary agree on failure classes. Panics are caught
//! at the boundary and reported as `GS_STATUS_ERROR`; they never unwind
//! into the caller.
//!
//! The generated header lives at `include/geosmooth.h` and is refreshed
//! on every build of this crate.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use geosmooth::casefile::{parse_case, parse_case_str, CaseDefinition};
use geosmooth::drivers::{builtin_case, run_case, RunOutcome};
use geosmooth::error::Error;
use geosmooth::verify;

/// Result of a geosmooth call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsStatus {
    /// The call succeeded.
    Ok = 0,
    /// An internal failure: geometry, numerics, I/O, or a caught panic.
    Error = 1,
    /// A solve that the driver requires to converge did not.
    NonConvergence = 2,
    /// The case file or its parameters are invalid.
    ConfigError = 3,
    /// A pointer argument was null or not valid UTF-8.
    InvalidArgument = 4,
}

/// Opaque handle to a parsed analysis case. Create with one of the
/// `gs_case_*` constructors, release with [`gs_case_free`].
pub struct GsCase {
    inner: CaseDefinition,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: String) {
    let message = CString::new(message).unwrap_or_else(|e| {
        let mut bytes = e.into_vec();
        bytes.retain(|&b| b != 0);
        CString::new(bytes).unwrap()
    });
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message);
}

fn fail(status: GsStatus, message: impl Into<String>) -> GsStatus {
    set_last_error(message.into());
    status
}

fn status_of(err: &Error) -> GsStatus {
    if err.exit_code() == 3 {
        GsStatus::ConfigError
    } else {
        GsStatus::Error
    }
}

/// Clears the error slot, runs the body, and converts a panic into
/// `GS_STATUS_ERROR` so unwinding never crosses the ABI boundary.
fn guarded(body: impl FnOnce() -> GsStatus) -> GsStatus {
    set_last_error(String::new());
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let detail = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "no panic message".into());
            fail(GsStatus::Error, format!("internal panic: {detail}"))
        }
    }
}

/// Reads a required C string argument, reporting null and encoding
/// problems through the error slot.
unsafe fn required_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, GsStatus> {
    if ptr.is_null() {
        return Err(fail(GsStatus::InvalidArgument, format!("{what} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(GsStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn deliver(out: *mut *mut GsCase, parsed: Result<CaseDefinition, Error>) -> GsStatus {
    match parsed {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(GsCase { inner }));
            GsStatus::Ok
        }
        Err(err) => fail(status_of(&err), err.to_string()),
    }
}

/// Returns the message for the most recent failure on this thread, or an
/// empty string when the last call succeeded. The pointer stays valid
/// until the next geosmooth call on the same thread; copy the string if
/// it must outlive that.
#[no_mangle]
pub extern "C" fn gs_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Parses the case file at `path` into a new handle stored in `*out`.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid
/// pointer; `*out` is set to null before parsing and owns the new handle
/// on success.
#[no_mangle]
pub unsafe extern "C" fn gs_case_open(path: *const c_char, out: *mut *mut GsCase) -> GsStatus {
    guarded(|| {
        if out.is_null() {
            return fail(GsStatus::InvalidArgument, "out pointer is null");
        }
        *out = std::ptr::null_mut();
        let path = match required_str(path, "case path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        deliver(out, parse_case(Path::new(path)))
    })
}

/// Parses case text held in memory into a new handle stored in `*out`.
///
/// # Safety
/// Same contract as [`gs_case_open`], with `text` holding the complete
/// case file contents.
#[no_mangle]
pub unsafe extern "C" fn gs_case_from_str(text: *const c_char, out: *mut *mut GsCase) -> GsStatus {
    guarded(|| {
        if out.is_null() {
            return fail(GsStatus::InvalidArgument, "out pointer is null");
        }
        *out = std::ptr::null_mut();
        let text = match required_str(text, "case text") {
            Ok(t) => t,
            Err(status) => return status,
        };
        deliver(out, parse_case_str(text))
    })
}

/// Loads one of the shipped benchmark cases (`cylinder`, `biaxial`,
/// `footing`, `tunnel`, `slope`) into a new handle stored in `*out`.
///
/// # Safety
/// Same contract as [`gs_case_open`].
#[no_mangle]
pub unsafe extern "C" fn gs_case_builtin(name: *const c_char, out: *mut *mut GsCase) -> GsStatus {
    guarded(|| {
        if out.is_null() {
            return fail(GsStatus::InvalidArgument, "out pointer is null");
        }
        *out = std::ptr::null_mut();
        let name = match required_str(name, "benchmark name") {
            Ok(n) => n,
            Err(status) => return status,
        };
        deliver(out, builtin_case(name))
    })
}

/// Redirects the case's output files to `directory`, creating it on the
/// next run if necessary.
///
/// # Safety
/// `case` must be a live handle from a `gs_case_*` constructor and
/// `directory` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gs_case_set_output_dir(
    case: *mut GsCase,
    directory: *const c_char,
) -> GsStatus {
    guarded(|| {
        let Some(case) = case.as_mut() else {
            return fail(GsStatus::InvalidArgument, "case handle is null");
        };
        let directory = match required_str(directory, "output directory") {
            Ok(d) => d,
            Err(status) => return status,
        };
        case.inner.output.directory = directory.to_string();
        GsStatus::Ok
    })
}

/// Runs the case's driver to completion, writing its output files. Maps a
/// schedule that fails to converge to `GS_STATUS_NON_CONVERGENCE` with
/// the driver's summary in the error slot.
///
/// # Safety
/// `case` must be a live handle from a `gs_case_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn gs_run(case: *const GsCase) -> GsStatus {
    guarded(|| {
        let Some(case) = case.as_ref() else {
            return fail(GsStatus::InvalidArgument, "case handle is null");
        };
        geosmooth::configure_deterministic();
        match run_case(&case.inner, false) {
            Ok(summary) => match summary.outcome {
                RunOutcome::Success => GsStatus::Ok,
                RunOutcome::NonConvergence => {
                    fail(GsStatus::NonConvergence, summary.notes.join("; "))
                }
            },
            Err(err) => fail(status_of(&err), err.to_string()),
        }
    })
}

/// Runs the built-in self-check battery. Returns `GS_STATUS_OK` when all
/// checks pass; otherwise the failing check names are in the error slot.
#[no_mangle]
pub extern "C" fn gs_verify() -> GsStatus {
    guarded(|| {
        geosmooth::configure_deterministic();
        match verify::run_all() {
            Ok(results) => {
                let failed: Vec<&str> = results
                    .iter()
                    .filter(|r| !r.passed)
                    .map(|r| r.name.as_str())
                    .collect();
                if failed.is_empty() {
                    GsStatus::Ok
                } else {
                    fail(
                        GsStatus::Error,
                        format!("self checks failed: {}", failed.join(", ")),
                    )
                }
            }
            Err(err) => fail(status_of(&err), err.to_string()),
        }
    })
}

/// Releases a handle. Passing null is a no-op; passing a handle twice is
/// undefined behaviour, as in `free`.
///
/// # Safety
/// `case` must be null or a live handle from a `gs_case_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn gs_case_free(case: *mut GsCase) {
    if !case.is_null() {
        drop(Box::from_raw(case));
    }
}
