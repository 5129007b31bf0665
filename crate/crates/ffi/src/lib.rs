//! C ABI over the `octmargin` library.
//!
//! Objects are exposed as opaque handles created by `*_load` functions and
//! released with the matching `*_free`. Every fallible call returns an
//! [`OctStatus`]; on failure a description is available from
//! [`oct_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use octmargin::eval::roc;
use octmargin::nn::{checkpoint, tumor_scores, NetworkParams};
use octmargin::preproc::surface::{detect_surface, SurfaceParams};
use octmargin::preproc::volume::BScanVolume;
use octmargin::{Error, TissueClass};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OctStatus {
    Ok = 0,
    /// Invalid argument or configuration.
    Usage = 1,
    /// Array dimensions do not fit the model or volume.
    Shape = 2,
    /// Non-finite values or diverged training.
    Numeric = 3,
    /// Malformed file or checksum mismatch.
    Format = 4,
    Io = 5,
    Empty = 6,
    Sampler = 7,
    StaleCache = 8,
    NullPointer = 9,
    /// A Rust panic was caught at the boundary.
    Internal = 10,
}

impl From<&Error> for OctStatus {
    fn from(e: &Error) -> Self {
        match e.code() {
            "usage" => OctStatus::Usage,
            "shape" => OctStatus::Shape,
            "numeric" => OctStatus::Numeric,
            "format" => OctStatus::Format,
            "io" => OctStatus::Io,
            "empty" => OctStatus::Empty,
            "sampler" => OctStatus::Sampler,
            "stale_cache" => OctStatus::StaleCache,
            _ => OctStatus::Internal,
        }
    }
}

/// A trained classifier.
pub struct OctModel {
    params: NetworkParams,
}

/// A B-scan volume.
pub struct OctVolume {
    volume: BScanVolume,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), (OctStatus, String)>) -> OctStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OctStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            OctStatus::Internal
        }
    }
}

fn lib(e: Error) -> (OctStatus, String) {
    (OctStatus::from(&e), e.to_string())
}

fn null(what: &str) -> (OctStatus, String) {
    (OctStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, (OctStatus, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| (OctStatus::Usage, "path is not valid UTF-8".to_string()))?;
    Ok(PathBuf::from(s))
}

/// Message of the last failing call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn oct_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn oct_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads an `OCTM` checkpoint into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn oct_model_load(path: *const c_char, out: *mut *mut OctModel) -> OctStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let params = checkpoint::load(&path_arg(path)?).map_err(lib)?;
        *out = Box::into_raw(Box::new(OctModel { params }));
        Ok(())
    })
}

/// Writes the model as an `OCTM` checkpoint.
///
/// # Safety
/// `model` must come from [`oct_model_load`]; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn oct_model_save(model: *const OctModel, path: *const c_char) -> OctStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        checkpoint::save(&model.params, &path_arg(path)?).map_err(lib)
    })
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `model` must come from [`oct_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn oct_model_free(model: *mut OctModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of values in one input patch (3·32·32 for the standard network).
///
/// # Safety
/// `model` must be null or come from [`oct_model_load`].
#[no_mangle]
pub unsafe extern "C" fn oct_model_input_len(model: *const OctModel) -> usize {
    model.as_ref().map_or(0, |m| m.params.arch().input.len())
}

/// Tumor probability for `count` patches stored contiguously in `inputs`
/// (`count · oct_model_input_len` values, channel-major), written to
/// `scores[0..count]`.
///
/// # Safety
/// `inputs` and `scores` must point to arrays of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn oct_model_tumor_scores(
    model: *const OctModel,
    inputs: *const f64,
    count: usize,
    scores: *mut f64,
) -> OctStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if count == 0 {
            return Ok(());
        }
        if inputs.is_null() {
            return Err(null("inputs"));
        }
        if scores.is_null() {
            return Err(null("scores"));
        }
        let len = model.params.arch().input.len();
        let flat = std::slice::from_raw_parts(inputs, count * len);
        let patches: Vec<&[f64]> = flat.chunks_exact(len).collect();
        let s = tumor_scores(&model.params, &patches).map_err(lib)?;
        std::slice::from_raw_parts_mut(scores, count).copy_from_slice(&s);
        Ok(())
    })
}

/// Loads an `OCTV` volume into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn oct_volume_load(path: *const c_char, out: *mut *mut OctVolume) -> OctStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let volume = BScanVolume::load(&path_arg(path)?).map_err(lib)?;
        *out = Box::into_raw(Box::new(OctVolume { volume }));
        Ok(())
    })
}

/// Releases a volume; null is ignored.
///
/// # Safety
/// `volume` must come from [`oct_volume_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn oct_volume_free(volume: *mut OctVolume) {
    if !volume.is_null() {
        drop(Box::from_raw(volume));
    }
}

/// Writes rows, cols and frames of the volume.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn oct_volume_dims(
    volume: *const OctVolume,
    rows: *mut usize,
    cols: *mut usize,
    frames: *mut usize,
) -> OctStatus {
    guard(|| {
        let v = &volume.as_ref().ok_or_else(|| null("volume"))?.volume;
        if rows.is_null() || cols.is_null() || frames.is_null() {
            return Err(null("dimension output"));
        }
        *rows = v.rows;
        *cols = v.cols;
        *frames = v.frames;
        Ok(())
    })
}

/// Detects the tissue surface of one frame with default parameters and
/// writes one row index per column (`cols` values) to `rows_out`.
///
/// # Safety
/// `rows_out` must hold at least `cols` values.
#[no_mangle]
pub unsafe extern "C" fn oct_volume_detect_surface(
    volume: *const OctVolume,
    frame: usize,
    rows_out: *mut f64,
) -> OctStatus {
    guard(|| {
        let v = &volume.as_ref().ok_or_else(|| null("volume"))?.volume;
        if rows_out.is_null() {
            return Err(null("rows_out"));
        }
        if frame >= v.frames {
            return Err((OctStatus::Usage, format!("frame {frame} outside a volume of {} frames", v.frames)));
        }
        let det = detect_surface(&v.frame(frame), &SurfaceParams::default()).map_err(lib)?;
        std::slice::from_raw_parts_mut(rows_out, v.cols).copy_from_slice(&det.curve.values);
        Ok(())
    })
}

/// Area under the ROC curve of tumor scores in `[0, 1]` against labels
/// (1 = tumor, 0 = normal). Fails with `Empty` when only one class occurs.
///
/// # Safety
/// `scores` and `labels` must hold `count` values; `auc` must be valid.
#[no_mangle]
pub unsafe extern "C" fn oct_roc_auc(scores: *const f64, labels: *const u8, count: usize, auc: *mut f64) -> OctStatus {
    guard(|| {
        if scores.is_null() || labels.is_null() || auc.is_null() {
            return Err(null("argument"));
        }
        let s = std::slice::from_raw_parts(scores, count);
        let truth: Vec<TissueClass> = std::slice::from_raw_parts(labels, count)
            .iter()
            .map(|&l| if l == 1 { TissueClass::Tumor } else { TissueClass::Normal })
            .collect();
        let curve = roc(&s.to_vec(), &truth).map_err(lib)?;
        *auc = curve.auc.ok_or((OctStatus::Empty, "labels contain a single class".to_string()))?;
        Ok(())
    })
}
