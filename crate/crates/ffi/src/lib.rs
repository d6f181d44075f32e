//! C ABI for the laser simulator and trained surrogate models.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free` function. Every fallible call returns a [`DmlStatus`];
//! on failure [`dml_last_error_message`] describes what went wrong. Panics
//! never cross the boundary.

mod error;

use std::ffi::{c_char, CStr};
use std::path::PathBuf;
use std::slice;

use dml_core::autodiff::Checkpoint;
use dml_core::laser::{relaxation_frequency, threshold_current, DriveConfig, LaserParams, SolverTolerances};
use dml_core::models::Model;
use dml_core::signal::simulate_target;

use error::{check, fail, guard};
pub use error::{dml_last_error_message, dml_status_name, DmlStatus};

/// Laser parameter set.
pub struct DmlLaser {
    params: LaserParams,
}

/// Trained surrogate model, evaluated in single precision.
pub struct DmlModel {
    model: Model<f32>,
}

fn path_arg(path: *const c_char) -> Result<PathBuf, DmlStatus> {
    if path.is_null() {
        return Err(fail(DmlStatus::NullPointer, "path is NULL"));
    }
    // SAFETY: non-null and NUL-terminated per the caller contract.
    let s = unsafe { CStr::from_ptr(path) };
    s.to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(DmlStatus::Validation, "path is not valid UTF-8"))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), DmlStatus> {
    if p.is_null() {
        Err(fail(DmlStatus::NullPointer, format!("{what} is NULL")))
    } else {
        Ok(())
    }
}

/// Version string of the library, static and NUL-terminated.
#[no_mangle]
pub extern "C" fn dml_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Allocate the built-in default laser parameters.
///
/// # Safety
/// `out` must be NULL or point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn dml_laser_default(out: *mut *mut DmlLaser) -> DmlStatus {
    guard(|| {
        non_null(out, "out")?;
        let laser = Box::new(DmlLaser {
            params: LaserParams::default(),
        });
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(laser) };
        Ok(())
    })
}

/// Load laser parameters from a `key = value` file.
///
/// # Safety
/// `path` must be NULL or a NUL-terminated string; `out` must be NULL or
/// point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn dml_laser_load(path: *const c_char, out: *mut *mut DmlLaser) -> DmlStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = path_arg(path)?;
        let params = check(LaserParams::load(&path))?;
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(DmlLaser { params })) };
        Ok(())
    })
}

/// Release a laser handle. NULL is ignored.
///
/// # Safety
/// `laser` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dml_laser_free(laser: *mut DmlLaser) {
    if !laser.is_null() {
        // SAFETY: ownership returns to Rust exactly once per the contract.
        drop(unsafe { Box::from_raw(laser) });
    }
}

/// Threshold current in amperes.
///
/// # Safety
/// `laser` must be NULL or a live handle; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn dml_laser_threshold_current(laser: *const DmlLaser, out: *mut f64) -> DmlStatus {
    guard(|| {
        non_null(laser, "laser")?;
        non_null(out, "out")?;
        // SAFETY: both checked non-null; validity is the caller's contract.
        let laser = unsafe { &*laser };
        let value = check(threshold_current(&laser.params))?;
        unsafe { *out = value };
        Ok(())
    })
}

/// Small-signal relaxation-oscillation frequency in hertz at bias `current`
/// amperes.
///
/// # Safety
/// `laser` must be NULL or a live handle; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn dml_laser_relaxation_frequency(
    laser: *const DmlLaser,
    current: f64,
    out: *mut f64,
) -> DmlStatus {
    guard(|| {
        non_null(laser, "laser")?;
        non_null(out, "out")?;
        // SAFETY: both checked non-null; validity is the caller's contract.
        let laser = unsafe { &*laser };
        let value = check(relaxation_frequency(current, &laser.params))?;
        unsafe { *out = value };
        Ok(())
    })
}

/// Solve the rate equations for a normalised drive waveform.
///
/// `input` holds `len` samples in [0, 1], mapped onto the default operating
/// point (bias 3·I_th, 2·I_th peak-to-peak) at `samples_per_symbol` samples
/// per symbol and symbol rate `fraction`·f_R. The min-max normalised optical
/// power is written to `out`, which must hold `len` values.
///
/// # Safety
/// `laser` must be NULL or a live handle; `input` and `out` must be NULL or
/// valid for `len` doubles and must not overlap.
#[no_mangle]
pub unsafe extern "C" fn dml_simulate(
    laser: *const DmlLaser,
    input: *const f64,
    len: usize,
    fraction: f64,
    samples_per_symbol: usize,
    out: *mut f64,
) -> DmlStatus {
    guard(|| {
        non_null(laser, "laser")?;
        non_null(input, "input")?;
        non_null(out, "out")?;
        // SAFETY: pointers checked non-null; lengths are the caller's contract.
        let laser = unsafe { &*laser };
        let input = unsafe { slice::from_raw_parts(input, len) };
        let out = unsafe { slice::from_raw_parts_mut(out, len) };
        let mut drive = check(DriveConfig::for_fraction(&laser.params, fraction))?;
        drive.samples_per_symbol = samples_per_symbol;
        check(drive.validate())?;
        let target = check(simulate_target(
            input,
            &drive,
            &laser.params,
            SolverTolerances::default(),
        ))?;
        out.copy_from_slice(&target);
        Ok(())
    })
}

/// Load a trained model from a checkpoint file.
///
/// # Safety
/// `path` must be NULL or a NUL-terminated string; `out` must be NULL or
/// point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn dml_model_load(path: *const c_char, out: *mut *mut DmlModel) -> DmlStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = path_arg(path)?;
        let model = check(Checkpoint::load(&path).and_then(|ck| Model::from_checkpoint(&ck)))?;
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(DmlModel { model })) };
        Ok(())
    })
}

/// Release a model handle. NULL is ignored.
///
/// # Safety
/// `model` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dml_model_free(model: *mut DmlModel) {
    if !model.is_null() {
        // SAFETY: ownership returns to Rust exactly once per the contract.
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Architecture name of the model (`"volterra"`, `"tdnn"`, `"lstm"` or
/// `"cat"`), static and NUL-terminated. NULL for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dml_model_kind(model: *const DmlModel) -> *const c_char {
    if model.is_null() {
        return std::ptr::null();
    }
    // SAFETY: non-null live handle per the contract.
    let name: &'static [u8] = match unsafe { &*model }.model.kind().name() {
        "volterra" => b"volterra\0",
        "tdnn" => b"tdnn\0",
        "lstm" => b"lstm\0",
        _ => b"cat\0",
    };
    name.as_ptr().cast()
}

/// Predict the normalised optical power for one waveform of `len` samples.
///
/// # Safety
/// `model` must be NULL or a live handle; `input` and `out` must be NULL or
/// valid for `len` floats and must not overlap.
#[no_mangle]
pub unsafe extern "C" fn dml_model_predict(
    model: *const DmlModel,
    input: *const f32,
    len: usize,
    out: *mut f32,
) -> DmlStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(input, "input")?;
        non_null(out, "out")?;
        // SAFETY: pointers checked non-null; lengths are the caller's contract.
        let model = unsafe { &*model };
        let input = unsafe { slice::from_raw_parts(input, len) };
        let out = unsafe { slice::from_raw_parts_mut(out, len) };
        if len == 0 {
            return Ok(());
        }
        let mut y = check(model.model.predict(&[input]))?;
        out.copy_from_slice(&y.swap_remove(0));
        Ok(())
    })
}
