//! C ABI for loading trained checkpoints, predicting, and scoring.
//!
//! Every fallible function returns an [`MfrpnStatus`]. On failure a
//! description is kept per thread and can be read with
//! [`mfrpn_last_error_message`]. Handles are opaque and must be released
//! with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mfrpn::cli::LoadedModel;
use mfrpn::{metrics, Error, ErrorKind, Matrix};

/// Result of every fallible call. The nonzero library codes match the
/// command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfrpnStatus {
    Ok = 0,
    Config = 2,
    Data = 3,
    Numeric = 4,
    Io = 5,
    NullPointer = 10,
    InvalidArgument = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

impl From<ErrorKind> for MfrpnStatus {
    fn from(k: ErrorKind) -> Self {
        match k {
            ErrorKind::Config => Self::Config,
            ErrorKind::Data => Self::Data,
            ErrorKind::Numeric => Self::Numeric,
            ErrorKind::Io => Self::Io,
        }
    }
}

/// A loaded checkpoint. Opaque to C.
pub struct MfrpnModel {
    inner: LoadedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(MfrpnStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(e.kind().into(), e.to_string())
    }
}

fn set_last_error(msg: Option<String>) {
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = msg.map(|m| CString::new(m.replace('\0', " ")).expect("nul bytes replaced"));
    });
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MfrpnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(None);
            MfrpnStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(Some(msg));
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(Some(format!("internal panic: {msg}")));
            MfrpnStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(MfrpnStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// `len` values starting at `p`; an empty slice when `len` is zero.
unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out(out: *mut f64, value: f64) -> Result<(), Failure> {
    non_null(out, "output pointer")?;
    *out = value;
    Ok(())
}

/// The message for the last failed call on this thread, or null after a
/// successful call. Valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn mfrpn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mfrpn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Opens a checkpoint directory written by `mfrpn train`. With
/// `extract_lf` set, an mf-rpn checkpoint is opened as its low-fidelity
/// heads. On success `*out` receives a handle for [`mfrpn_model_free`].
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfrpn_model_open(
    path: *const c_char,
    extract_lf: bool,
    out: *mut *mut MfrpnModel,
) -> MfrpnStatus {
    guard(|| {
        non_null(path, "path")?;
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Failure(MfrpnStatus::InvalidArgument, "path is not valid UTF-8".into()))?;
        let inner = LoadedModel::open(Path::new(path), extract_lf)?;
        *out = Box::into_raw(Box::new(MfrpnModel { inner }));
        Ok(())
    })
}

/// Releases a handle from [`mfrpn_model_open`]. Null is ignored.
///
/// # Safety
/// `model` must be null or a live handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mfrpn_model_free(model: *mut MfrpnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of raw input features, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mfrpn_model_input_dim(model: *const MfrpnModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.input_dim())
}

/// Number of output variables, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mfrpn_model_output_dim(model: *const MfrpnModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.output_dim())
}

/// Number of ensemble members, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mfrpn_model_member_count(model: *const MfrpnModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.member_count())
}

/// Predicts `n_samples` raw input rows (row-major, `n_inputs` columns).
/// Writes the ensemble mean and spread, each `n_samples * output_dim`
/// row-major values in physical units, into caller buffers of `out_len`
/// entries. `sigma` may be null when the spread is not wanted.
///
/// # Safety
/// `inputs` must hold `n_samples * n_inputs` values; `mean` (and `sigma`
/// when non-null) must have room for `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn mfrpn_model_predict(
    model: *const MfrpnModel,
    inputs: *const f64,
    n_samples: usize,
    n_inputs: usize,
    mean: *mut f64,
    sigma: *mut f64,
    out_len: usize,
) -> MfrpnStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(mean, "mean")?;
        let model = &(*model).inner;
        let total = n_samples
            .checked_mul(n_inputs)
            .ok_or_else(|| Failure(MfrpnStatus::InvalidArgument, "input size overflows".into()))?;
        let needed = n_samples * model.output_dim();
        if out_len < needed {
            return Err(Failure(
                MfrpnStatus::BufferTooSmall,
                format!("output buffers hold {out_len} values, {needed} needed"),
            ));
        }
        let x = Matrix::from_vec(n_samples, n_inputs, slice(inputs, total, "inputs")?.to_vec())?;
        let pred = model.predict_inputs(&x)?;
        std::slice::from_raw_parts_mut(mean, needed).copy_from_slice(pred.mean.as_slice());
        if !sigma.is_null() {
            std::slice::from_raw_parts_mut(sigma, needed).copy_from_slice(pred.sigma.as_slice());
        }
        Ok(())
    })
}

/// Fair ensemble CRPS of `n` samples against observation `y`.
///
/// # Safety
/// `samples` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfrpn_crps_fair(samples: *const f64, n: usize, y: f64, out: *mut f64) -> MfrpnStatus {
    guard(|| {
        let v = metrics::crps_fair(slice(samples, n, "samples")?, y)?;
        write_out(out, v)
    })
}

/// `scale` times the mean absolute error over `n` pairs.
///
/// # Safety
/// `preds` and `targets` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfrpn_mae(
    preds: *const f64,
    targets: *const f64,
    n: usize,
    scale: f64,
    out: *mut f64,
) -> MfrpnStatus {
    guard(|| {
        let v = metrics::mae(slice(preds, n, "preds")?, slice(targets, n, "targets")?, scale)?;
        write_out(out, v)
    })
}

/// Coefficient of determination over `n` pairs. Fails with
/// [`MfrpnStatus::Numeric`] when the targets have zero variance.
///
/// # Safety
/// `preds` and `targets` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfrpn_r2(preds: *const f64, targets: *const f64, n: usize, out: *mut f64) -> MfrpnStatus {
    guard(|| {
        let v = metrics::r2(slice(preds, n, "preds")?, slice(targets, n, "targets")?)?;
        write_out(out, v)
    })
}
