//! Time-domain signal containers and the STFT analysis/synthesis front end.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Array3, ArrayView1, ArrayView2, Axis};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod wav;

/// Multichannel real signal, `channels × length`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    samples: Array2<f64>,
    sample_rate: f64,
}

impl TimeSignal {
    pub fn new(samples: Array2<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if samples.nrows() == 0 {
            return Err(Error::EmptyInput("signal has no channels"));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("signal contains non-finite samples"));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Single-channel signal from a slice.
    pub fn mono(samples: &[f64], sample_rate: f64) -> Result<Self> {
        let arr = Array2::from_shape_vec((1, samples.len()), samples.to_vec())
            .map_err(|e| Error::shape(e.to_string()))?;
        Self::new(arr, sample_rate)
    }

    pub fn zeros(channels: usize, length: usize, sample_rate: f64) -> Result<Self> {
        Self::new(Array2::zeros((channels, length)), sample_rate)
    }

    pub fn samples(&self) -> ArrayView2<'_, f64> {
        self.samples.view()
    }

    pub fn into_samples(self) -> Array2<f64> {
        self.samples
    }

    pub fn channel(&self, q: usize) -> ArrayView1<'_, f64> {
        self.samples.row(q)
    }

    pub fn num_channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Sum of squared samples of one channel.
    pub fn channel_energy(&self, q: usize) -> f64 {
        self.samples.row(q).iter().map(|x| x * x).sum()
    }
}

/// Analysis window shape. All windows are periodic (DFT-even).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hann,
    Hamming,
    #[serde(alias = "rect")]
    Rectangular,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        let n = len as f64;
        (0..len)
            .map(|i| {
                let phase = 2.0 * PI * i as f64 / n;
                match self {
                    Window::Hann => 0.5 - 0.5 * phase.cos(),
                    Window::Hamming => 0.54 - 0.46 * phase.cos(),
                    Window::Rectangular => 1.0,
                }
            })
            .collect()
    }

    /// Constant overlap-add gain of this window at `hop`, or an error if the
    /// shifted windows do not sum to a constant.
    pub fn cola_gain(self, len: usize, hop: usize) -> Result<f64> {
        if hop == 0 || hop > len {
            return Err(Error::NonReconstructing(format!(
                "hop {hop} with window length {len}"
            )));
        }
        let w = self.coefficients(len);
        let sums: Vec<f64> = (0..hop)
            .map(|i| w.iter().skip(i).step_by(hop).sum())
            .collect();
        let max = sums.iter().cloned().fold(f64::MIN, f64::max);
        let min = sums.iter().cloned().fold(f64::MAX, f64::min);
        if max <= 0.0 || (max - min) > 1e-9 * max {
            return Err(Error::NonReconstructing(format!(
                "{self} window of length {len} is not constant overlap-add at hop {hop}"
            )));
        }
        Ok(max)
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Window::Hann => "hann",
            Window::Hamming => "hamming",
            Window::Rectangular => "rect",
        })
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hann" | "hanning" => Ok(Window::Hann),
            "hamming" => Ok(Window::Hamming),
            "rect" | "rectangular" | "boxcar" => Ok(Window::Rectangular),
            other => Err(Error::invalid(format!(
                "unknown window '{other}' (expected hann, hamming, rect)"
            ))),
        }
    }
}

/// STFT parameters. Defaults: 512-sample (32 ms at 16 kHz) periodic Hann, 256-sample hop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StftConfig {
    pub window_length: usize,
    pub hop: usize,
    pub window: Window,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_length: 512,
            hop: 256,
            window: Window::Hann,
        }
    }
}

impl StftConfig {
    pub fn num_bins(&self) -> usize {
        self.window_length / 2 + 1
    }

    /// Signal length that yields exactly `frames` frames.
    pub fn samples_for_frames(&self, frames: usize) -> usize {
        (frames.max(1) - 1) * self.hop + self.window_length
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_length < 2 || self.window_length % 2 != 0 {
            return Err(Error::invalid(format!(
                "window length must be even and >= 2, got {}",
                self.window_length
            )));
        }
        if self.hop == 0 || self.hop > self.window_length {
            return Err(Error::invalid(format!(
                "hop must be in 1..={}, got {}",
                self.window_length, self.hop
            )));
        }
        Ok(())
    }
}

/// One-sided complex spectrogram, `Q × K × N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    bins: Array3<Complex64>,
    sample_rate: f64,
    hop: usize,
    window_length: usize,
}

impl Spectrogram {
    pub fn new(
        bins: Array3<Complex64>,
        sample_rate: f64,
        hop: usize,
        window_length: usize,
    ) -> Result<Self> {
        let (q, k, n) = bins.dim();
        if q == 0 || n == 0 {
            return Err(Error::EmptyInput(
                "spectrogram needs at least one channel and frame",
            ));
        }
        if k != window_length / 2 + 1 {
            return Err(Error::shape(format!(
                "{k} bins inconsistent with window length {window_length}"
            )));
        }
        if bins.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("spectrogram contains non-finite values"));
        }
        Ok(Self {
            bins,
            sample_rate,
            hop,
            window_length,
        })
    }

    pub fn bins(&self) -> &Array3<Complex64> {
        &self.bins
    }

    pub fn into_bins(self) -> Array3<Complex64> {
        self.bins
    }

    pub fn num_channels(&self) -> usize {
        self.bins.dim().0
    }

    pub fn num_bins(&self) -> usize {
        self.bins.dim().1
    }

    pub fn num_frames(&self) -> usize {
        self.bins.dim().2
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn window_length(&self) -> usize {
        self.window_length
    }

    /// Physical centre frequency of bin `k` in Hz.
    pub fn bin_frequency(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate / self.window_length as f64
    }

    /// Same spectrogram metadata with different contents.
    pub fn with_bins(&self, bins: Array3<Complex64>) -> Result<Self> {
        Self::new(bins, self.sample_rate, self.hop, self.window_length)
    }

    /// Copy restricted to the frames in `range`.
    pub fn select_frames(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.num_frames() {
            return Err(Error::EmptyRange {
                start: range.start,
                end: range.end,
                frames: self.num_frames(),
            });
        }
        self.with_bins(self.bins.slice(ndarray::s![.., .., range]).to_owned())
    }

    pub(crate) fn same_shape(&self, other: &Spectrogram) -> bool {
        self.bins.dim() == other.bins.dim()
    }
}

/// Short-time Fourier transform of every channel. Frame `n` covers samples
/// `[n*hop, n*hop + window_length)`; no centering or padding is applied.
pub fn stft(signal: &TimeSignal, config: &StftConfig) -> Result<Spectrogram> {
    config.validate()?;
    let w_len = config.window_length;
    if signal.len() < w_len {
        return Err(Error::InsufficientSamples {
            needed: w_len,
            got: signal.len(),
        });
    }
    let frames = 1 + (signal.len() - w_len) / config.hop;
    let k_bins = config.num_bins();
    let window = config.window.coefficients(w_len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(w_len);

    let mut bins = Array3::<Complex64>::zeros((signal.num_channels(), k_bins, frames));
    let mut buf = vec![Complex64::new(0.0, 0.0); w_len];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for (q, channel) in signal.samples.axis_iter(Axis(0)).enumerate() {
        for n in 0..frames {
            let start = n * config.hop;
            for (i, slot) in buf.iter_mut().enumerate() {
                *slot = Complex64::new(channel[start + i] * window[i], 0.0);
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for k in 0..k_bins {
                bins[[q, k, n]] = buf[k];
            }
        }
    }
    Spectrogram::new(bins, signal.sample_rate, config.hop, w_len)
}

/// Inverse STFT by overlap-add, normalized by the window's constant overlap-add
/// gain. Requires a COLA window/hop pair.
pub fn istft(spec: &Spectrogram, window: Window) -> Result<TimeSignal> {
    let w_len = spec.window_length;
    let hop = spec.hop;
    let gain = window.cola_gain(w_len, hop)?;
    let (channels, k_bins, frames) = spec.bins.dim();
    let length = (frames - 1) * hop + w_len;
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(w_len);
    let mut scratch = vec![Complex64::new(0.0, 0.0); ifft.get_inplace_scratch_len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); w_len];
    let mut out = Array2::<f64>::zeros((channels, length));
    let scale = 1.0 / (w_len as f64 * gain);

    for q in 0..channels {
        for n in 0..frames {
            // Hermitian extension of the one-sided spectrum.
            for k in 0..k_bins {
                buf[k] = spec.bins[[q, k, n]];
            }
            buf[0].im = 0.0;
            buf[k_bins - 1].im = 0.0;
            for k in k_bins..w_len {
                buf[k] = buf[w_len - k].conj();
            }
            ifft.process_with_scratch(&mut buf, &mut scratch);
            let start = n * hop;
            for (i, z) in buf.iter().enumerate() {
                out[[q, start + i]] += z.re * scale;
            }
        }
    }
    TimeSignal::new(out, spec.sample_rate)
}

/// Sample range of an `istft` output where every sample is covered by full
/// window overlap, for a spectrogram with `frames` frames.
pub fn interior_range(window_length: usize, hop: usize, frames: usize) -> std::ops::Range<usize> {
    let start = window_length - hop;
    let end = frames * hop;
    start..end.max(start)
}
