//! C ABI for the gruntkit pipeline: opaque handles, integer status codes,
//! and a thread-local last-error message. The header is generated by
//! cbindgen into `include/gruntkit.h`.
//!
//! Conventions:
//! - Constructors return an owned pointer or null; on null, call
//!   `gruntkit_last_error_message` for the reason.
//! - Functions returning `GruntkitStatus` report success as `Ok` (0).
//! - Every owned pointer has exactly one matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use gruntkit::dsp::{mfcc, resample, spectrogram_image, FrameMatrix};
use gruntkit::eval::{confusion, uar};
use gruntkit::ingest::{decode_wav, generate_synthetic_corpus, AudioClip, SyntheticSpec};
use gruntkit::lld::{extract_llds, LldConfig};

/// Status codes returned by fallible functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GruntkitStatus {
    Ok = 0,
    InvalidArgument = 1,
    IoError = 2,
    DspError = 3,
    InternalError = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<Vec<u8>>) {
    let message = CString::new(message).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn classify(e: &gruntkit::Error) -> GruntkitStatus {
    use gruntkit::Error::*;
    match e {
        Io(_) | Wav(_) | Cache(_) => GruntkitStatus::IoError,
        Dsp(_) | ClipTooShort { .. } | DegenerateSpectrogram { .. } | UpsampleUnsupported { .. } => {
            GruntkitStatus::DspError
        }
        _ => GruntkitStatus::InvalidArgument,
    }
}

/// Run a closure, capturing panics and errors into the thread-local slot.
fn guard<T>(f: impl FnOnce() -> Result<T, (GruntkitStatus, String)>) -> Result<T, GruntkitStatus> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => Ok(v),
        Ok(Err((status, message))) => {
            set_error(message);
            Err(status)
        }
        Err(_) => {
            set_error("internal panic");
            Err(GruntkitStatus::InternalError)
        }
    }
}

/// Mono audio handle.
pub struct GruntkitClip {
    inner: AudioClip,
}

/// Row-major time x descriptor matrix handle.
pub struct GruntkitMatrix {
    inner: FrameMatrix,
}

/// Crate version as a static NUL-terminated string. Do not free.
#[no_mangle]
pub extern "C" fn gruntkit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the most recent error on this thread, or null. The pointer is
/// valid until the next failing call on the same thread. Do not free.
#[no_mangle]
pub extern "C" fn gruntkit_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |s| s.as_ptr())
    })
}

/// Decode a 16-bit PCM WAV file into a clip. Returns null on failure.
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gruntkit_clip_from_wav_file(path: *const c_char) -> *mut GruntkitClip {
    let result = guard(|| {
        if path.is_null() {
            return Err((GruntkitStatus::InvalidArgument, "path is null".into()));
        }
        let path = unsafe { CStr::from_ptr(path) }
            .to_str()
            .map_err(|_| (GruntkitStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let bytes = std::fs::read(path).map_err(|e| (GruntkitStatus::IoError, e.to_string()))?;
        let clip = decode_wav(&bytes).map_err(|e| (classify(&e), e.to_string()))?;
        Ok(Box::into_raw(Box::new(GruntkitClip { inner: clip })))
    });
    result.unwrap_or(std::ptr::null_mut())
}

/// Wrap raw samples (copied) as a clip. Returns null on failure.
///
/// # Safety
/// `samples` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn gruntkit_clip_from_samples(
    samples: *const c_double,
    len: usize,
    sample_rate: u32,
) -> *mut GruntkitClip {
    let result = guard(|| {
        if samples.is_null() || len == 0 || sample_rate == 0 {
            return Err((
                GruntkitStatus::InvalidArgument,
                "need a non-empty sample buffer and a positive rate".into(),
            ));
        }
        let data = unsafe { std::slice::from_raw_parts(samples, len) }.to_vec();
        Ok(Box::into_raw(Box::new(GruntkitClip {
            inner: AudioClip::new(data, sample_rate),
        })))
    });
    result.unwrap_or(std::ptr::null_mut())
}

/// # Safety
/// `clip` must be a pointer returned by a gruntkit constructor, freed once.
#[no_mangle]
pub unsafe extern "C" fn gruntkit_clip_free(clip: *mut GruntkitClip) {
    if !clip.is_null() {
        drop(unsafe { Box::from_raw(clip) });
    }
}

/// # Safety
/// `clip` must be a live clip handle.
#[no_mangle]
pub unsafe extern "C" fn gruntkit_clip_sample_rate(clip: *const GruntkitClip) -> u32 {
    if clip.is_null() {
        return 0;
    }
    unsafe { &*clip }.inner.sample_rate
}

/// # Safety
/// `clip` must be a live clip handle.
#[no_mangle]
pub unsafe extern "C" fn gruntkit_clip_sample_count(clip: *const GruntkitClip) -> usize {
    if clip.is_null() {
        return 0;
    }
    unsafe { &*clip }.inner.samples.len()
}

/// Resample to a lower or equal rate. Returns a new clip or null.
///
/// # Safety
/// `clip` must be a live clip handle.
#[no_mangle]
pub unsafe extern "C" fn gruntkit_clip_resample(
    clip: *const GruntkitClip,
    target_rate: u32,
) -> *mut GruntkitClip {
    let result = guard(|| {
        if clip.is_null() {
            return Err((GruntkitStatus::InvalidArgument, "clip is null".into()));
        }
        let clip = unsafe { &*clip };
        let out = resample(&clip.inner, target_rate).map_err(|e| (classify(&e), e.to_string()))?;
        Ok(Box::into_raw(Box::new(GruntkitClip { inner: out })))
    });
    result.unwrap_or(std::ptr::null_mut())
}

fn matrix_ptr(m: FrameMatrix) -> *mut GruntkitMatrix {
    Box::into_raw(Box::new(GruntkitMatrix { inner: m }))
}

/// 44 x 40 MFCC matrix of a 1000 ms clip at 44.1 kHz. Null on failure.
///
/// # Safety
/// `clip` must be a live clip handle.
#[no_mangle]
pub unsafe extern "C" fn gruntkit_mfcc(clip: *const GruntkitClip) -> *mut GruntkitMatrix {
    let result = guard(|| {
        if clip.is_null() {
            return Err((GruntkitStatus::InvalidArgument, "clip is null".into()));
        }
        let clip = unsafe { &*clip };
        let m = mfcc(&clip.inner).map_err(|e| (classify(&e), e.to_string()))?;
        Ok(matrix_ptr(m))
    });
    result.unwrap_or(std::ptr::null_mut())
}

/// 227 x 227 normalized log-magnitude spectrogram image (time x frequency).
///
/// # Safety
/// `clip` must be a live clip handle.
#[no_mangle]
pub unsafe extern "C" fn gruntkit_spectrogram(clip: *const GruntkitClip) -> *mut GruntkitMatrix {
    let result = guard(|| {
        if clip.is_null() {
            return Err((GruntkitStatus::InvalidArgument, "clip is null".into()));
        }
        let clip = unsafe { &*clip };
        let img = spectrogram_image(&clip.inner).map_err(|e| (classify(&e), e.to_string()))?;
        let ms = clip.inner.duration_seconds() * 1000.0;
        Ok(matrix_ptr(img.to_frame_matrix(ms)))
    });
    result.unwrap_or(std::ptr::null_mut())
}

/// Low-level descriptor matrix at a 10 ms frame period (padded 130-channel
/// layout). Input above 16 kHz is resampled internally.
///
/// # Safety
/// `clip` must be a live clip handle.
#[no_mangle]
pub unsafe extern "C" fn gruntkit_llds(clip: *const GruntkitClip) -> *mut GruntkitMatrix {
    let result = guard(|| {
        if clip.is_null() {
            return Err((GruntkitStatus::InvalidArgument, "clip is null".into()));
        }
        let clip = unsafe { &*clip };
        let at_16k = if clip.inner.sample_rate == 16000 {
            clip.inner.clone()
        } else {
            resample(&clip.inner, 16000).map_err(|e| (classify(&e), e.to_string()))?
        };
        let m = extract_llds(&at_16k, &LldConfig::default())
            .map_err(|e| (classify(&e), e.to_string()))?;
        Ok(matrix_ptr(m))
    });
    result.unwrap_or(std::ptr::null_mut())
}

/// # Safety
/// `matrix` must be a live matrix handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn gruntkit_matrix_free(matrix: *mut GruntkitMatrix) {
    if !matrix.is_null() {
        drop(unsafe { Box::from_raw(matrix) });
    }
}

/// # Safety
/// `matrix` must be a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn gruntkit_matrix_rows(matrix: *const GruntkitMatrix) -> usize {
    if matrix.is_null() {
        return 0;
    }
    unsafe { &*matrix }.inner.rows()
}

/// # Safety
/// `matrix` must be a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn gruntkit_matrix_cols(matrix: *const GruntkitMatrix) -> usize {
    if matrix.is_null() {
        return 0;
    }
    unsafe { &*matrix }.inner.cols()
}

/// Row-major data pointer (`rows * cols` doubles), valid while the matrix
/// handle lives.
///
/// # Safety
/// `matrix` must be a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn gruntkit_matrix_data(matrix: *const GruntkitMatrix) -> *const c_double {
    if matrix.is_null() {
        return std::ptr::null();
    }
    unsafe { &*matrix }.inner.data().as_ptr()
}

/// Unweighted average recall of binary label arrays (values 0 or 1).
///
/// # Safety
/// `truth` and `predicted` must point to `len` readable ints; `out_uar`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn gruntkit_uar(
    truth: *const c_int,
    predicted: *const c_int,
    len: usize,
    out_uar: *mut c_double,
) -> GruntkitStatus {
    let result = guard(|| {
        if truth.is_null() || predicted.is_null() || out_uar.is_null() || len == 0 {
            return Err((GruntkitStatus::InvalidArgument, "null buffer or empty input".into()));
        }
        let truth = unsafe { std::slice::from_raw_parts(truth, len) };
        let predicted = unsafe { std::slice::from_raw_parts(predicted, len) };
        let to_labels = |xs: &[c_int]| -> Result<Vec<usize>, (GruntkitStatus, String)> {
            xs.iter()
                .map(|&v| {
                    if v == 0 || v == 1 {
                        Ok(v as usize)
                    } else {
                        Err((GruntkitStatus::InvalidArgument, format!("label {v} outside {{0,1}}")))
                    }
                })
                .collect()
        };
        let cm = confusion(&to_labels(truth)?, &to_labels(predicted)?, 2)
            .map_err(|e| (classify(&e), e.to_string()))?;
        let value = uar(&cm).map_err(|e| (classify(&e), e.to_string()))?;
        unsafe { *out_uar = value };
        Ok(GruntkitStatus::Ok)
    });
    result.unwrap_or_else(|status| status)
}

/// Write a deterministic synthetic corpus (clip store plus manifest).
///
/// # Safety
/// `out_dir` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gruntkit_synth_corpus(
    out_dir: *const c_char,
    players: usize,
    clips_per_player: usize,
    seed: u64,
) -> GruntkitStatus {
    let result = guard(|| {
        if out_dir.is_null() {
            return Err((GruntkitStatus::InvalidArgument, "out_dir is null".into()));
        }
        let dir = unsafe { CStr::from_ptr(out_dir) }
            .to_str()
            .map_err(|_| (GruntkitStatus::InvalidArgument, "out_dir is not UTF-8".into()))?;
        let spec = SyntheticSpec::new(players, clips_per_player, seed);
        let corpus = generate_synthetic_corpus(&spec).map_err(|e| (classify(&e), e.to_string()))?;
        corpus
            .write_to_dir(dir)
            .map_err(|e| (classify(&e), e.to_string()))?;
        Ok(GruntkitStatus::Ok)
    });
    result.unwrap_or_else(|status| status)
}
