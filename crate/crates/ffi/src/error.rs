use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, UnwindSafe};

use dml_core::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmlStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// An argument or input file was rejected.
    Validation = 2,
    /// The computation failed (solver step underflow, non-finite values).
    Numeric = 3,
    /// A file could not be read.
    Io = 4,
    /// A file was read but is malformed.
    Format = 5,
    /// The library panicked; this is a bug.
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

pub(crate) fn status_of(err: &Error) -> DmlStatus {
    match err {
        Error::Validation(_) | Error::ShapeMismatch { .. } | Error::Degenerate(_) => DmlStatus::Validation,
        Error::Format(_) => DmlStatus::Format,
        Error::Io { .. } => DmlStatus::Io,
        Error::Sequence { source, .. } => status_of(source),
        _ => DmlStatus::Numeric,
    }
}

pub(crate) fn fail(status: DmlStatus, msg: impl Into<String>) -> DmlStatus {
    set_last_error(msg.into());
    status
}

/// Run `f`, recording any error or panic as the thread's last error.
pub(crate) fn guard<F>(f: F) -> DmlStatus
where
    F: FnOnce() -> Result<(), DmlStatus> + UnwindSafe,
{
    match catch_unwind(f) {
        Ok(Ok(())) => DmlStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(DmlStatus::Panic, "internal panic"),
    }
}

pub(crate) fn check<T>(r: dml_core::Result<T>) -> Result<T, DmlStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

/// Message of the last failed call on this thread, or NULL if none.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dml_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Static name of a status code, e.g. `"validation"`.
#[no_mangle]
pub extern "C" fn dml_status_name(status: DmlStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        DmlStatus::Ok => b"ok\0",
        DmlStatus::NullPointer => b"null pointer\0",
        DmlStatus::Validation => b"validation\0",
        DmlStatus::Numeric => b"numeric\0",
        DmlStatus::Io => b"io\0",
        DmlStatus::Format => b"format\0",
        DmlStatus::Panic => b"panic\0",
    };
    s.as_ptr().cast()
}
