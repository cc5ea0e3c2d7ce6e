//! C ABI over the `doalab` library.
//!
//! Objects are opaque handles created by `doa_*_new`/`doa_stft` and released
//! with the matching `doa_*_free`. Every fallible function returns a
//! [`DoaStatus`]; on failure [`doa_last_error_message`] describes the error
//! for the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use doalab::attention::{psm_mask, AttentionMask};
use doalab::estimate::{srp_flops, Estimator, EstimatorConfig, Method};
use doalab::signal::Spectrogram;
use doalab::{stft, ArrayGeometry, DoaGrid, Error, StftConfig, TimeSignal, Window};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    /// Empty frame range, empty attention, or a spectrum without a positive peak.
    Empty = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoaMethod {
    SrpPhat = 0,
    SrpMp = 1,
    SrpOutputMasked = 2,
    NormMusic = 3,
}

impl From<DoaMethod> for Method {
    fn from(m: DoaMethod) -> Method {
        match m {
            DoaMethod::SrpPhat => Method::SrpP,
            DoaMethod::SrpMp => Method::SrpMp,
            DoaMethod::SrpOutputMasked => Method::SrpOm,
            DoaMethod::NormMusic => Method::Music,
        }
    }
}

/// Multichannel STFT.
pub struct DoaSpectrogram(Spectrogram);

/// Time-frequency attention mask.
pub struct DoaMask(AttentionMask);

/// DOA grid, array geometry and precomputed steering vectors.
pub struct DoaEstimator(Estimator);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> DoaStatus {
    match e {
        Error::ShapeMismatch(_) => DoaStatus::ShapeMismatch,
        Error::EmptyAttention
        | Error::EmptyRange { .. }
        | Error::ZeroSpectrum
        | Error::EmptyInput(_) => DoaStatus::Empty,
        Error::File { .. } | Error::Io(_) | Error::Wav(_) | Error::Json(_) | Error::Csv(_) => {
            DoaStatus::Io
        }
        _ => DoaStatus::InvalidArgument,
    }
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (DoaStatus, String)>) -> DoaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DoaStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DoaStatus::Panic
        }
    }
}

trait IntoFfi<T> {
    fn ffi(self) -> Result<T, (DoaStatus, String)>;
}

impl<T> IntoFfi<T> for doalab::Result<T> {
    fn ffi(self) -> Result<T, (DoaStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (DoaStatus, String) {
    (DoaStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (DoaStatus, String) {
    (DoaStatus::InvalidArgument, msg.into())
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (DoaStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn doa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn doa_version() -> *const c_char {
    static VERSION: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(v) => v,
            Err(_) => panic!("version string"),
        };
    VERSION.as_ptr()
}

/// Per-frame SRP-PHAT flop estimate for `bins` frequency bins, `directions`
/// grid points and `mics` microphones.
///
/// # Safety
/// `out` must be a valid pointer to a `u64`.
#[no_mangle]
pub unsafe extern "C" fn doa_srp_flops(
    bins: u64,
    directions: u64,
    mics: u64,
    out: *mut u64,
) -> DoaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = srp_flops(bins, directions, mics).ffi()?;
        Ok(())
    })
}

/// STFT of `channels × length` samples stored channel after channel.
/// `window` is 0 for Hann, 1 for Hamming, 2 for rectangular.
///
/// # Safety
/// `samples` must point to `channels * length` doubles; `out` to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn doa_stft(
    samples: *const f64,
    channels: usize,
    length: usize,
    sample_rate: f64,
    window_length: usize,
    hop: usize,
    window: u32,
    out: *mut *mut DoaSpectrogram,
) -> DoaStatus {
    guard(|| {
        if samples.is_null() {
            return Err(null("samples"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let total = channels
            .checked_mul(length)
            .ok_or_else(|| invalid("size overflow"))?;
        let data = std::slice::from_raw_parts(samples, total).to_vec();
        let window = match window {
            0 => Window::Hann,
            1 => Window::Hamming,
            2 => Window::Rectangular,
            w => return Err(invalid(format!("unknown window code {w}"))),
        };
        let array = ndarray::Array2::from_shape_vec((channels, length), data)
            .map_err(|e| invalid(e.to_string()))?;
        let signal = TimeSignal::new(array, sample_rate).ffi()?;
        let config = StftConfig {
            window_length,
            hop,
            window,
        };
        let spec = stft(&signal, &config).ffi()?;
        *out = Box::into_raw(Box::new(DoaSpectrogram(spec)));
        Ok(())
    })
}

/// Writes the channel, bin and frame counts; any output may be null.
///
/// # Safety
/// `spec` must be a live handle; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn doa_spectrogram_dims(
    spec: *const DoaSpectrogram,
    channels: *mut usize,
    bins: *mut usize,
    frames: *mut usize,
) -> DoaStatus {
    guard(|| {
        let s = &deref(spec, "spec")?.0;
        for (p, v) in [
            (channels, s.num_channels()),
            (bins, s.num_bins()),
            (frames, s.num_frames()),
        ] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `spec` must be null or a handle from `doa_stft` not freed before.
#[no_mangle]
pub unsafe extern "C" fn doa_spectrogram_free(spec: *mut DoaSpectrogram) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Mask from `bins × frames` weights in [0, 1], stored bin after bin.
///
/// # Safety
/// `weights` must point to `bins * frames` doubles; `out` to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn doa_mask_new(
    weights: *const f64,
    bins: usize,
    frames: usize,
    out: *mut *mut DoaMask,
) -> DoaStatus {
    guard(|| {
        if weights.is_null() {
            return Err(null("weights"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let total = bins
            .checked_mul(frames)
            .ok_or_else(|| invalid("size overflow"))?;
        let data = std::slice::from_raw_parts(weights, total).to_vec();
        let array = ndarray::Array2::from_shape_vec((bins, frames), data)
            .map_err(|e| invalid(e.to_string()))?;
        let mask = AttentionMask::new(array).ffi()?;
        *out = Box::into_raw(Box::new(DoaMask(mask)));
        Ok(())
    })
}

/// Oracle phase-sensitive mask of `direct` within `mixture` at microphone `channel`.
///
/// # Safety
/// Both spectrograms must be live handles; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn doa_mask_psm(
    direct: *const DoaSpectrogram,
    mixture: *const DoaSpectrogram,
    channel: usize,
    out: *mut *mut DoaMask,
) -> DoaStatus {
    guard(|| {
        let d = &deref(direct, "direct")?.0;
        let m = &deref(mixture, "mixture")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let mask = psm_mask(d, m, channel).ffi()?;
        *out = Box::into_raw(Box::new(DoaMask(mask)));
        Ok(())
    })
}

/// # Safety
/// `mask` must be null or a live mask handle.
#[no_mangle]
pub unsafe extern "C" fn doa_mask_free(mask: *mut DoaMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

/// Estimator for a uniform linear array of `num_mics` microphones spaced
/// `spacing_m` apart, a `grid_size`-point grid over [0°, 180°], and STFTs
/// with `fft_length` samples at `sample_rate`.
///
/// # Safety
/// `out` must be a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn doa_estimator_new(
    num_mics: usize,
    spacing_m: f64,
    speed_of_sound: f64,
    grid_size: usize,
    sample_rate: f64,
    fft_length: usize,
    num_sources: usize,
    out: *mut *mut DoaEstimator,
) -> DoaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let geometry = ArrayGeometry::uniform(num_mics, spacing_m, speed_of_sound).ffi()?;
        let grid = DoaGrid::uniform(grid_size).ffi()?;
        let config = EstimatorConfig {
            music_sources: num_sources,
            ..EstimatorConfig::default()
        };
        let est = Estimator::new(grid, geometry, sample_rate, fft_length, config).ffi()?;
        *out = Box::into_raw(Box::new(DoaEstimator(est)));
        Ok(())
    })
}

/// # Safety
/// `est` must be null or a live estimator handle.
#[no_mangle]
pub unsafe extern "C" fn doa_estimator_free(est: *mut DoaEstimator) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Number of grid points, i.e. the spectrum length `doa_estimate` writes.
///
/// # Safety
/// `est` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn doa_estimator_grid_size(est: *const DoaEstimator) -> usize {
    est.as_ref().map_or(0, |e| e.0.grid().len())
}

/// Normalized spatial spectrum over frames `[frame_start, frame_end)` and the
/// DOA in degrees at its peak. `mask` may be null (all ones); it is ignored
/// by `DOA_METHOD_SRP_PHAT`. `sps` receives `sps_len` values and must match
/// the grid size; either output may be null.
///
/// # Safety
/// Handles must be live; `sps` must point to `sps_len` doubles if non-null.
#[no_mangle]
pub unsafe extern "C" fn doa_estimate(
    est: *const DoaEstimator,
    method: DoaMethod,
    spec: *const DoaSpectrogram,
    mask: *const DoaMask,
    frame_start: usize,
    frame_end: usize,
    sps: *mut f64,
    sps_len: usize,
    doa_deg: *mut f64,
) -> DoaStatus {
    guard(|| {
        let e = &deref(est, "estimator")?.0;
        let y = &deref(spec, "spectrogram")?.0;
        let m = mask.as_ref().map(|m| &m.0);
        if !sps.is_null() && sps_len != e.grid().len() {
            return Err((
                DoaStatus::ShapeMismatch,
                format!(
                    "sps buffer holds {sps_len} values, grid has {}",
                    e.grid().len()
                ),
            ));
        }
        let result = e
            .estimate(method.into(), y, m, frame_start..frame_end)
            .ffi()?;
        if !sps.is_null() {
            ptr::copy_nonoverlapping(result.values().as_ptr(), sps, sps_len);
        }
        if !doa_deg.is_null() {
            *doa_deg = e.pick(&result).ffi()?;
        }
        Ok(())
    })
}
