//! DOA estimators and their shared spatial-spectrum utilities.
//!
//! The SRP family follows one pipeline: PHAT weighting of the STFT bins,
//! optional multiplication by an attention mask, weighted cross-spectra, and
//! steering over the DOA grid. With an all-ones mask SRP-MP is SRP-PHAT.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use ndarray::{Array1, Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::attention::AttentionMask;
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, DoaGrid, SteeringMatrix};
use crate::signal::Spectrogram;

pub mod music;
pub mod srp;

pub use music::norm_music;
pub use srp::{
    cross_spectral_tensor, mask_weighting, narrowband_srp, output_masking, phat_weighting, srp,
    CrossSpectralTensor, PhatWeighting,
};

pub const DEFAULT_EPSILON: f64 = 1e-8;

pub(crate) fn check_range(range: &Range<usize>, frames: usize) -> Result<()> {
    if range.start >= range.end || range.end > frames {
        return Err(Error::EmptyRange {
            start: range.start,
            end: range.end,
            frames,
        });
    }
    Ok(())
}

/// Broadband spatial power spectrum over the DOA grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialPowerSpectrum {
    values: Array1<f64>,
    normalized: bool,
}

impl SpatialPowerSpectrum {
    pub fn unnormalized(values: Vec<f64>) -> Self {
        Self {
            values: Array1::from(values),
            normalized: false,
        }
    }

    /// Wraps values that already have a maximum of exactly 1.
    pub fn from_normalized(values: Vec<f64>) -> Result<Self> {
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max != 1.0 {
            return Err(Error::invalid(format!(
                "normalized spectrum must peak at 1, got {max}"
            )));
        }
        Ok(Self {
            values: Array1::from(values),
            normalized: true,
        })
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// First index of the maximum.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn normalized(&self) -> Result<Self> {
        normalize_sps(self)
    }
}

/// Divides by the maximum. Spectra without a positive maximum cannot be
/// normalized.
pub fn normalize_sps(s: &SpatialPowerSpectrum) -> Result<SpatialPowerSpectrum> {
    if s.normalized {
        return Ok(s.clone());
    }
    let max = s.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::ZeroSpectrum);
    }
    let mut values = s.values.mapv(|v| v / max);
    values[s.argmax()] = 1.0;
    Ok(SpatialPowerSpectrum {
        values,
        normalized: true,
    })
}

/// Per-frame spectra, `C × N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSpectra {
    values: Array2<f64>,
}

impl FrameSpectra {
    pub fn new(values: Array2<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn num_frames(&self) -> usize {
        self.values.ncols()
    }
}

/// Per-bin, per-frame spectra, `C × K × N`.
#[derive(Debug, Clone, PartialEq)]
pub struct NarrowbandSpectra {
    values: Array3<f64>,
}

impl NarrowbandSpectra {
    pub fn new(values: Array3<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }
}

/// Arithmetic mean of the per-frame spectra over `range`.
pub fn aggregate_frames(e: &FrameSpectra, range: Range<usize>) -> Result<SpatialPowerSpectrum> {
    check_range(&range, e.num_frames())?;
    let slice = e.values.slice(ndarray::s![.., range]);
    let mean = slice.mean_axis(Axis(1)).expect("non-empty range");
    Ok(SpatialPowerSpectrum::unnormalized(mean.to_vec()))
}

/// Grid angle at the first maximum of `sps`.
pub fn pick_doa(sps: &SpatialPowerSpectrum, grid: &DoaGrid) -> Result<f64> {
    if sps.len() != grid.len() {
        return Err(Error::shape(format!(
            "spectrum has {} points, grid {}",
            sps.len(),
            grid.len()
        )));
    }
    Ok(grid.angle(sps.argmax()))
}

/// Mean squared difference between two normalized spectra.
pub fn sps_loss(estimate: &SpatialPowerSpectrum, clean: &SpatialPowerSpectrum) -> Result<f64> {
    if estimate.len() != clean.len() {
        return Err(Error::shape(format!(
            "spectra of length {} and {}",
            estimate.len(),
            clean.len()
        )));
    }
    if !estimate.normalized || !clean.normalized {
        return Err(Error::invalid("sps_loss expects normalized spectra"));
    }
    let sum: f64 = estimate
        .values
        .iter()
        .zip(clean.values.iter())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok(sum / estimate.len() as f64)
}

/// Approximate flops per frame of SRP-PHAT:
/// `((Q−1)²/2)·(4·K·C + 6·K) + 5·K·Q`.
pub fn srp_flops(bins: u64, directions: u64, mics: u64) -> Result<u64> {
    if bins == 0 || directions == 0 || mics == 0 {
        return Err(Error::invalid(format!(
            "flop model needs K, C, Q >= 1, got K={bins} C={directions} Q={mics}"
        )));
    }
    let qm1 = mics - 1;
    // 4KC + 6K is even, so halving it keeps the count integral
    Ok(qm1 * qm1 * (2 * bins * directions + 3 * bins) + 5 * bins * mics)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// SRP with plain PHAT weighting; ignores any mask.
    #[serde(rename = "srp-p")]
    SrpP,
    /// SRP with mask-modified PHAT weighting.
    #[serde(rename = "srp-mp")]
    SrpMp,
    /// Narrowband SRP combined with mask-weighted output averaging.
    #[serde(rename = "srp-om")]
    SrpOm,
    /// Band-normalized MUSIC with mask-weighted covariances.
    #[serde(rename = "music")]
    Music,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::SrpP, Method::SrpMp, Method::SrpOm, Method::Music];

    pub fn uses_mask(self) -> bool {
        !matches!(self, Method::SrpP)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::SrpP => "srp-p",
            Method::SrpMp => "srp-mp",
            Method::SrpOm => "srp-om",
            Method::Music => "music",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown method '{s}' (valid: srp-p, srp-mp, srp-om, music)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    /// PHAT floor.
    pub epsilon: f64,
    /// Drop bins above the array's spatial-aliasing frequency.
    pub exclude_aliased_bins: bool,
    /// Signal subspace dimension for MUSIC.
    pub music_sources: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            exclude_aliased_bins: false,
            music_sources: 1,
        }
    }
}

/// Grid, geometry and precomputed steering for one STFT configuration.
#[derive(Debug, Clone)]
pub struct Estimator {
    grid: DoaGrid,
    geometry: ArrayGeometry,
    steering: SteeringMatrix,
    bin_enabled: Vec<bool>,
    config: EstimatorConfig,
}

impl Estimator {
    pub fn new(
        grid: DoaGrid,
        geometry: ArrayGeometry,
        sample_rate: f64,
        fft_length: usize,
        config: EstimatorConfig,
    ) -> Result<Self> {
        let bins = fft_length / 2 + 1;
        let steering = SteeringMatrix::new(&grid, &geometry, bins, sample_rate, fft_length)?;
        let cutoff = geometry.aliasing_frequency();
        let bin_enabled = (0..bins)
            .map(|k| {
                !config.exclude_aliased_bins || k as f64 * sample_rate / fft_length as f64 <= cutoff
            })
            .collect();
        Ok(Self {
            grid,
            geometry,
            steering,
            bin_enabled,
            config,
        })
    }

    pub fn for_spectrogram(
        grid: DoaGrid,
        geometry: ArrayGeometry,
        y: &Spectrogram,
        config: EstimatorConfig,
    ) -> Result<Self> {
        Self::new(grid, geometry, y.sample_rate(), y.window_length(), config)
    }

    pub fn grid(&self) -> &DoaGrid {
        &self.grid
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn steering(&self) -> &SteeringMatrix {
        &self.steering
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    fn check_input(&self, y: &Spectrogram) -> Result<()> {
        if y.num_bins() != self.steering.num_bins() || y.num_channels() != self.steering.num_mics()
        {
            return Err(Error::shape(format!(
                "spectrogram has {} channels × {} bins, estimator expects {} × {}",
                y.num_channels(),
                y.num_bins(),
                self.steering.num_mics(),
                self.steering.num_bins()
            )));
        }
        Ok(())
    }

    /// Mask restricted to `frames` with disabled bins zeroed.
    fn effective_mask(
        &self,
        y: &Spectrogram,
        mask: Option<&AttentionMask>,
        frames: &Range<usize>,
    ) -> Result<AttentionMask> {
        let base = match mask {
            Some(m) => {
                m.check_matches(y)?;
                m.select_frames(frames.clone())?
            }
            None => AttentionMask::ones(y.num_bins(), frames.len()),
        };
        if self.bin_enabled.iter().all(|&b| b) {
            return Ok(base);
        }
        let mut w = base.weights().clone();
        for (k, &on) in self.bin_enabled.iter().enumerate() {
            if !on {
                w.row_mut(k).fill(0.0);
            }
        }
        AttentionMask::new(w)
    }

    fn weighted_phi(
        &self,
        y: &Spectrogram,
        mask: Option<&AttentionMask>,
        frames: &Range<usize>,
    ) -> Result<CrossSpectralTensor> {
        self.check_input(y)?;
        check_range(frames, y.num_frames())?;
        let m = self.effective_mask(y, mask, frames)?;
        if !(m.total() > 0.0) {
            return Err(Error::EmptyAttention);
        }
        let yr = y.select_frames(frames.clone())?;
        let w = mask_weighting(&phat_weighting(&yr, self.config.epsilon)?, &m)?;
        cross_spectral_tensor(&yr, &w)
    }

    /// Unnormalized SRP with mask-modified PHAT over `frames`; `None` means no mask.
    pub fn srp_mp_raw(
        &self,
        y: &Spectrogram,
        mask: Option<&AttentionMask>,
        frames: Range<usize>,
    ) -> Result<SpatialPowerSpectrum> {
        let phi = self.weighted_phi(y, mask, &frames)?;
        srp(&phi, &self.steering, 0..frames.len())
    }

    pub fn srp_phat(&self, y: &Spectrogram, frames: Range<usize>) -> Result<SpatialPowerSpectrum> {
        normalize_sps(&self.srp_mp_raw(y, None, frames)?)
    }

    pub fn srp_mp(
        &self,
        y: &Spectrogram,
        mask: &AttentionMask,
        frames: Range<usize>,
    ) -> Result<SpatialPowerSpectrum> {
        normalize_sps(&self.srp_mp_raw(y, Some(mask), frames)?)
    }

    /// Narrowband SRP-PHAT combined by mask-weighted averaging.
    pub fn srp_output_masked(
        &self,
        y: &Spectrogram,
        mask: &AttentionMask,
        frames: Range<usize>,
    ) -> Result<SpatialPowerSpectrum> {
        let phi = self.weighted_phi(y, None, &frames)?;
        let nb = narrowband_srp(&phi, &self.steering, 0..frames.len())?;
        let m = self.effective_mask(y, Some(mask), &frames)?;
        normalize_sps(&output_masking(&nb, &m)?)
    }

    pub fn norm_music(
        &self,
        y: &Spectrogram,
        mask: &AttentionMask,
        frames: Range<usize>,
    ) -> Result<SpatialPowerSpectrum> {
        self.check_input(y)?;
        let raw = norm_music(
            y,
            mask,
            &self.steering,
            frames,
            self.config.music_sources,
            Some(&self.bin_enabled),
        )?;
        normalize_sps(&raw)
    }

    /// Normalized spectrum of `method`; a missing mask means all ones.
    pub fn estimate(
        &self,
        method: Method,
        y: &Spectrogram,
        mask: Option<&AttentionMask>,
        frames: Range<usize>,
    ) -> Result<SpatialPowerSpectrum> {
        let ones;
        let mask = match mask {
            Some(m) => m,
            None => {
                ones = AttentionMask::ones(y.num_bins(), y.num_frames());
                &ones
            }
        };
        match method {
            Method::SrpP => self.srp_phat(y, frames),
            Method::SrpMp => self.srp_mp(y, mask, frames),
            Method::SrpOm => self.srp_output_masked(y, mask, frames),
            Method::Music => self.norm_music(y, mask, frames),
        }
    }

    /// Single-frame SRP-MP spectra for every frame in `frames`, unnormalized.
    pub fn frame_spectra(
        &self,
        y: &Spectrogram,
        mask: Option<&AttentionMask>,
        frames: Range<usize>,
    ) -> Result<FrameSpectra> {
        let phi = self.weighted_phi(y, mask, &frames)?;
        let mut values = Array2::<f64>::zeros((self.grid.len(), frames.len()));
        for n in 0..frames.len() {
            let e = srp(&phi, &self.steering, n..n + 1)?;
            values.column_mut(n).assign(e.values());
        }
        Ok(FrameSpectra::new(values))
    }

    pub fn pick(&self, sps: &SpatialPowerSpectrum) -> Result<f64> {
        pick_doa(sps, &self.grid)
    }
}

/// SRP-PHAT over all frames with default settings.
pub fn srp_phat(
    y: &Spectrogram,
    grid: &DoaGrid,
    geometry: &ArrayGeometry,
) -> Result<SpatialPowerSpectrum> {
    Estimator::for_spectrogram(
        grid.clone(),
        geometry.clone(),
        y,
        EstimatorConfig::default(),
    )?
    .srp_phat(y, 0..y.num_frames())
}

/// SRP with mask-modified PHAT over all frames with default settings.
pub fn srp_mp(
    y: &Spectrogram,
    mask: &AttentionMask,
    grid: &DoaGrid,
    geometry: &ArrayGeometry,
) -> Result<SpatialPowerSpectrum> {
    Estimator::for_spectrogram(
        grid.clone(),
        geometry.clone(),
        y,
        EstimatorConfig::default(),
    )?
    .srp_mp(y, mask, 0..y.num_frames())
}
