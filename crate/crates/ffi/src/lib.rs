//! C ABI over the `pccsnet` predictor.
//!
//! Models are opaque handles created by [`pccs_model_load`] and released with
//! [`pccs_model_free`]. Every fallible call returns a [`PccsStatus`]; the
//! message of the most recent failure on the calling thread is available from
//! [`pccs_last_error_message`]. Points are passed as interleaved `x, y` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use pccsnet::{checkpoint, metrics, Error, ModelBundle, Point, OBS_LEN, PRED_LEN};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PccsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Checksum = 5,
    Version = 6,
    Internal = 7,
}

/// A loaded model. Opaque to C callers.
pub struct PccsModel {
    bundle: ModelBundle,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let msg = CString::new(message.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> PccsStatus {
    match e {
        Error::Io(_) => PccsStatus::Io,
        Error::Checksum { .. } => PccsStatus::Checksum,
        Error::Version { .. } => PccsStatus::Version,
        Error::Format(_) | Error::Parse { .. } => PccsStatus::Format,
        Error::Config(_) | Error::Dimension { .. } | Error::EmptySequence => PccsStatus::InvalidArgument,
        _ => PccsStatus::Internal,
    }
}

fn guarded(f: impl FnOnce() -> Result<(), (PccsStatus, String)>) -> PccsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PccsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PccsStatus::Internal
        }
    }
}

fn fail(e: Error) -> (PccsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (PccsStatus, String) {
    (PccsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_points<const N: usize>(xy: *const f64) -> [Point; N] {
    let s = slice::from_raw_parts(xy, 2 * N);
    std::array::from_fn(|i| [s[2 * i], s[2 * i + 1]])
}

unsafe fn write_points(points: &[Point], out: *mut f64) {
    let s = slice::from_raw_parts_mut(out, 2 * points.len());
    for (i, p) in points.iter().enumerate() {
        s[2 * i] = p[0];
        s[2 * i + 1] = p[1];
    }
}

/// Loads a checkpoint file and stores a new handle in `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pccs_model_load(path: *const c_char, out: *mut *mut PccsModel) -> PccsStatus {
    guarded(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (PccsStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
        let bundle = checkpoint::load_checkpoint(path).map_err(fail)?;
        *out = Box::into_raw(Box::new(PccsModel { bundle }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must come from [`pccs_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pccs_model_free(model: *mut PccsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of modalities `K`, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pccs_model_num_modalities(model: *const PccsModel) -> usize {
    model.as_ref().map_or(0, |m| m.bundle.k())
}

/// Predicts the `k` most probable continuations of 8 observed points.
///
/// `obs_xy` holds 16 doubles. On success `out_xy` receives `k × 24` doubles
/// (12 points per hypothesis), `out_prob` `k` probabilities in descending
/// order, and `out_modality` (may be null) the `k` modality ids.
///
/// # Safety
/// All non-null pointers must reference buffers of the sizes above.
#[no_mangle]
pub unsafe extern "C" fn pccs_model_predict(
    model: *const PccsModel,
    obs_xy: *const f64,
    k: usize,
    out_xy: *mut f64,
    out_prob: *mut f64,
    out_modality: *mut usize,
) -> PccsStatus {
    guarded(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if obs_xy.is_null() || out_xy.is_null() || out_prob.is_null() {
            return Err(null("buffer"));
        }
        if k == 0 || k > model.bundle.k() {
            return Err((
                PccsStatus::InvalidArgument,
                format!("k must lie in 1..={}", model.bundle.k()),
            ));
        }
        let obs: [Point; OBS_LEN] = read_points(obs_xy);
        let set = model.bundle.predict_topk(&obs, k).map_err(fail)?;
        for (i, e) in set.entries.iter().enumerate() {
            write_points(&e.trajectory, out_xy.add(i * 2 * PRED_LEN));
            *out_prob.add(i) = e.probability;
            if !out_modality.is_null() {
                *out_modality.add(i) = e.modality;
            }
        }
        Ok(())
    })
}

/// Constant-velocity extrapolation: 16 input doubles, 24 output doubles.
///
/// # Safety
/// Buffers must have the sizes above.
#[no_mangle]
pub unsafe extern "C" fn pccs_constant_velocity(obs_xy: *const f64, out_xy: *mut f64) -> PccsStatus {
    guarded(|| {
        if obs_xy.is_null() || out_xy.is_null() {
            return Err(null("buffer"));
        }
        let obs: [Point; OBS_LEN] = read_points(obs_xy);
        write_points(&metrics::constant_velocity_baseline(&obs), out_xy);
        Ok(())
    })
}

unsafe fn pair_metric(
    pred_xy: *const f64,
    truth_xy: *const f64,
    steps: usize,
    out: *mut f64,
    f: fn(&[Point], &[Point]) -> pccsnet::Result<f64>,
) -> PccsStatus {
    guarded(|| {
        if pred_xy.is_null() || truth_xy.is_null() || out.is_null() {
            return Err(null("buffer"));
        }
        let read = |p: *const f64| -> Vec<Point> {
            slice::from_raw_parts(p, 2 * steps)
                .chunks(2)
                .map(|c| [c[0], c[1]])
                .collect()
        };
        *out = f(&read(pred_xy), &read(truth_xy)).map_err(fail)?;
        Ok(())
    })
}

/// Average displacement error over `steps` points.
///
/// # Safety
/// `pred_xy` and `truth_xy` hold `2 × steps` doubles; `out` is valid.
#[no_mangle]
pub unsafe extern "C" fn pccs_ade(pred_xy: *const f64, truth_xy: *const f64, steps: usize, out: *mut f64) -> PccsStatus {
    pair_metric(pred_xy, truth_xy, steps, out, metrics::ade)
}

/// Final displacement error over `steps` points.
///
/// # Safety
/// As [`pccs_ade`].
#[no_mangle]
pub unsafe extern "C" fn pccs_fde(pred_xy: *const f64, truth_xy: *const f64, steps: usize, out: *mut f64) -> PccsStatus {
    pair_metric(pred_xy, truth_xy, steps, out, metrics::fde)
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn pccs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn pccs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
