//! C ABI over the `diffanon` library.
//!
//! Every fallible function returns a [`DiffanonStatus`]; on failure the
//! message is available from [`diffanon_last_error_message`] on the same
//! thread. Models are opaque handles released with [`diffanon_model_free`].
//! Panics never cross the boundary: they surface as `DIFFANON_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use diffanon::fusion::{fuse, FusionScheme};
use diffanon::metrics;
use diffanon::oneclass::{load_model, OneClassModel};
use diffanon::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffanonStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    ModelFormat = 4,
    UnsupportedVersion = 5,
    Checksum = 6,
    DimensionMismatch = 7,
    NonFinite = 8,
    Evaluation = 9,
    Panic = 10,
    Internal = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffanonFusion {
    Sub = 0,
    Sub2 = 1,
    Abs = 2,
}

impl From<DiffanonFusion> for FusionScheme {
    fn from(f: DiffanonFusion) -> Self {
        match f {
            DiffanonFusion::Sub => FusionScheme::Sub,
            DiffanonFusion::Sub2 => FusionScheme::Sub2,
            DiffanonFusion::Abs => FusionScheme::Abs,
        }
    }
}

impl From<FusionScheme> for DiffanonFusion {
    fn from(f: FusionScheme) -> Self {
        match f {
            FusionScheme::Sub => DiffanonFusion::Sub,
            FusionScheme::Sub2 => DiffanonFusion::Sub2,
            FusionScheme::Abs => DiffanonFusion::Abs,
        }
    }
}

/// Opaque trained model.
pub struct DiffanonModel {
    inner: OneClassModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DiffanonStatus {
    match e {
        Error::Io { .. } => DiffanonStatus::Io,
        Error::ModelFormat(_) => DiffanonStatus::ModelFormat,
        Error::UnsupportedVersion { .. } => DiffanonStatus::UnsupportedVersion,
        Error::Checksum => DiffanonStatus::Checksum,
        Error::DimensionMismatch { .. } => DiffanonStatus::DimensionMismatch,
        Error::NonFinite(_) => DiffanonStatus::NonFinite,
        Error::Evaluation(_) => DiffanonStatus::Evaluation,
        Error::InvalidConfig(_) | Error::InvalidRecord(_) => DiffanonStatus::InvalidArgument,
        _ => DiffanonStatus::Internal,
    }
}

struct Failure(DiffanonStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DiffanonStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DiffanonStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DiffanonStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            DiffanonStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be null or point to `len` readable doubles.
unsafe fn view<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn model_ref<'a>(model: *const DiffanonModel) -> Result<&'a OneClassModel, Failure> {
    model.as_ref().map(|m| &m.inner).ok_or_else(|| null("model"))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Loads a model file. On success `*out` owns a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn diffanon_model_load(path: *const c_char, out: *mut *mut DiffanonModel) -> DiffanonStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(ptr::null_mut());
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Failure(DiffanonStatus::InvalidArgument, "path is not valid UTF-8".into()))?;
        let inner = load_model(path)?;
        out.write(Box::into_raw(Box::new(DiffanonModel { inner })));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`diffanon_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn diffanon_model_free(model: *mut DiffanonModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn diffanon_model_input_dim(model: *const DiffanonModel, out: *mut usize) -> DiffanonStatus {
    guard(|| write_out(out, model_ref(model)?.input_dim, "out"))
}

/// Fusion scheme the model was trained with.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn diffanon_model_fusion(model: *const DiffanonModel, out: *mut DiffanonFusion) -> DiffanonStatus {
    guard(|| write_out(out, model_ref(model)?.scheme.into(), "out"))
}

/// Anomaly score of a (reference, probe) pair; higher is more anomalous.
///
/// # Safety
/// `reference` and `probe` must each point to `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn diffanon_model_score_pair(
    model: *const DiffanonModel,
    reference: *const f64,
    probe: *const f64,
    dim: usize,
    out: *mut f64,
) -> DiffanonStatus {
    guard(|| {
        let m = model_ref(model)?;
        let a = view(reference, dim, "reference")?;
        let b = view(probe, dim, "probe")?;
        write_out(out, m.score_pair(a, b)?, "out")
    })
}

/// Anomaly score of an already fused vector.
///
/// # Safety
/// `fused` must point to `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn diffanon_model_score_fused(
    model: *const DiffanonModel,
    fused: *const f64,
    dim: usize,
    out: *mut f64,
) -> DiffanonStatus {
    guard(|| {
        let m = model_ref(model)?;
        let x = view(fused, dim, "fused")?;
        write_out(out, m.score_fused(x)?, "out")
    })
}

/// Fuses two embeddings into `out` (`dim` doubles).
///
/// # Safety
/// `a`, `b` and `out` must each point to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn diffanon_fuse(
    a: *const f64,
    b: *const f64,
    dim: usize,
    scheme: DiffanonFusion,
    out: *mut f64,
) -> DiffanonStatus {
    guard(|| {
        let a = view(a, dim, "a")?;
        let b = view(b, dim, "b")?;
        if out.is_null() && dim > 0 {
            return Err(null("out"));
        }
        let fused = fuse(a, b, scheme.into())?;
        if dim > 0 {
            slice::from_raw_parts_mut(out, dim).copy_from_slice(&fused.values);
        }
        Ok(())
    })
}

/// # Safety
/// Score arrays must hold `n_bona_fide` and `n_attack` doubles; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn diffanon_d_eer(
    bona_fide: *const f64,
    n_bona_fide: usize,
    attack: *const f64,
    n_attack: usize,
    rate: *mut f64,
    threshold: *mut f64,
) -> DiffanonStatus {
    guard(|| {
        let bp = view(bona_fide, n_bona_fide, "bona_fide")?;
        let at = view(attack, n_attack, "attack")?;
        if rate.is_null() || threshold.is_null() {
            return Err(null("output"));
        }
        let e = metrics::d_eer(bp, at)?;
        rate.write(e.rate);
        threshold.write(e.threshold);
        Ok(())
    })
}

/// # Safety
/// Score arrays must hold `n_bona_fide` and `n_attack` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn diffanon_bpcer_at_apcer(
    bona_fide: *const f64,
    n_bona_fide: usize,
    attack: *const f64,
    n_attack: usize,
    target_apcer: f64,
    out: *mut f64,
) -> DiffanonStatus {
    guard(|| {
        let bp = view(bona_fide, n_bona_fide, "bona_fide")?;
        let at = view(attack, n_attack, "attack")?;
        write_out(out, metrics::bpcer_at_apcer(bp, at, target_apcer)?, "out")
    })
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn diffanon_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn diffanon_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}
