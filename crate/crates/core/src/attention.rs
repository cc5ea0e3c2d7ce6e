//! Time-frequency attention masks: oracle masks from ground truth, binary
//! thresholding, and synthetic band-selection masks.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::signal::Spectrogram;

/// Per-bin weights in [0, 1], `K × N`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMask {
    weights: Array2<f64>,
}

impl AttentionMask {
    pub fn new(weights: Array2<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::invalid(format!("mask weight {w} outside [0, 1]")));
        }
        Ok(Self { weights })
    }

    pub fn ones(bins: usize, frames: usize) -> Self {
        Self {
            weights: Array2::ones((bins, frames)),
        }
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn num_bins(&self) -> usize {
        self.weights.nrows()
    }

    pub fn num_frames(&self) -> usize {
        self.weights.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.weights.dim()
    }

    pub fn total(&self) -> f64 {
        self.weights.sum()
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
        Ok(Self {
            weights: self.weights.slice(ndarray::s![.., range]).to_owned(),
        })
    }

    pub(crate) fn check_matches(&self, spec: &Spectrogram) -> Result<()> {
        if self.dim() != (spec.num_bins(), spec.num_frames()) {
            return Err(Error::shape(format!(
                "mask is {:?} but spectrogram is {} bins × {} frames",
                self.dim(),
                spec.num_bins(),
                spec.num_frames()
            )));
        }
        Ok(())
    }
}

fn check_pair(direct: &Spectrogram, mixture: &Spectrogram, channel: usize) -> Result<()> {
    if !direct.same_shape(mixture) {
        return Err(Error::shape(format!(
            "direct {:?} vs mixture {:?}",
            direct.bins().dim(),
            mixture.bins().dim()
        )));
    }
    if channel >= mixture.num_channels() {
        return Err(Error::invalid(format!(
            "channel {channel} out of range for {} channels",
            mixture.num_channels()
        )));
    }
    Ok(())
}

/// Phase-sensitive mask of the direct signal within the mixture at one
/// microphone: `max(0, sqrt(|Xd|² / (|Xd|² + |Y−Xd|²)) · cos(∠Xd − ∠Y))`.
/// Bins where both energies vanish get 0.
pub fn psm_mask(
    direct: &Spectrogram,
    mixture: &Spectrogram,
    channel: usize,
) -> Result<AttentionMask> {
    check_pair(direct, mixture, channel)?;
    let (_, k, n) = mixture.bins().dim();
    let xd = direct.bins();
    let y = mixture.bins();
    let weights = Array2::from_shape_fn((k, n), |(kk, nn)| {
        let d = xd[[channel, kk, nn]];
        let m = y[[channel, kk, nn]];
        let sig = d.norm_sqr();
        let den = sig + (m - d).norm_sqr();
        if den == 0.0 {
            return 0.0;
        }
        let v = (sig / den).sqrt() * (d.arg() - m.arg()).cos();
        v.clamp(0.0, 1.0)
    });
    Ok(AttentionMask { weights })
}

/// Magnitude ratio mask `min(1, |Xd| / |Y|)`; bins with `|Y| = 0` get 0.
pub fn magnitude_ratio_mask(
    direct: &Spectrogram,
    mixture: &Spectrogram,
    channel: usize,
) -> Result<AttentionMask> {
    check_pair(direct, mixture, channel)?;
    let (_, k, n) = mixture.bins().dim();
    let xd = direct.bins();
    let y = mixture.bins();
    let weights = Array2::from_shape_fn((k, n), |(kk, nn)| {
        let my = y[[channel, kk, nn]].norm();
        if my == 0.0 {
            0.0
        } else {
            (xd[[channel, kk, nn]].norm() / my).min(1.0)
        }
    });
    Ok(AttentionMask { weights })
}

/// Binary mask: 0 where the weight is strictly below `threshold`, else 1.
pub fn binarize(mask: &AttentionMask, threshold: f64) -> Result<AttentionMask> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid(format!(
            "threshold {threshold} outside [0, 1]"
        )));
    }
    Ok(AttentionMask {
        weights: mask.weights.mapv(|w| if w < threshold { 0.0 } else { 1.0 }),
    })
}

/// `num_bands` frequency rows drawn uniformly without replacement, active in every frame.
pub fn random_band_mask(
    bins: usize,
    frames: usize,
    num_bands: usize,
    seed: u64,
) -> Result<AttentionMask> {
    if num_bands > bins {
        return Err(Error::invalid(format!(
            "cannot select {num_bands} of {bins} bands"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Array2::zeros((bins, frames));
    for k in rand::seq::index::sample(&mut rng, bins, num_bands) {
        weights.row_mut(k).fill(1.0);
    }
    Ok(AttentionMask { weights })
}

/// Rows `lo..=hi` set to 1.
pub fn band_range_mask(bins: usize, frames: usize, lo: usize, hi: usize) -> Result<AttentionMask> {
    if lo > hi || hi >= bins {
        return Err(Error::invalid(format!(
            "band range {lo}..={hi} invalid for {bins} bins"
        )));
    }
    let mut weights = Array2::zeros((bins, frames));
    for k in lo..=hi {
        weights.row_mut(k).fill(1.0);
    }
    Ok(AttentionMask { weights })
}

pub const MASK_MAGIC: &[u8; 8] = b"DOAMASK1";

/// Serializes a mask: magic, `u32` K, `u32` N (little endian), then K·N
/// little-endian `f32` weights, bin-major.
pub fn write_mask<W: Write>(mut w: W, mask: &AttentionMask) -> Result<()> {
    let (k, n) = mask.dim();
    let k32 = u32::try_from(k).map_err(|_| Error::invalid("mask too large"))?;
    let n32 = u32::try_from(n).map_err(|_| Error::invalid("mask too large"))?;
    let mut buf = Vec::with_capacity(16 + 4 * k * n);
    buf.extend_from_slice(MASK_MAGIC);
    buf.extend_from_slice(&k32.to_le_bytes());
    buf.extend_from_slice(&n32.to_le_bytes());
    for &v in mask.weights.iter() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_mask<R: Read>(mut r: R) -> Result<AttentionMask> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)
        .map_err(|_| Error::invalid("mask file shorter than its 16-byte header"))?;
    if &header[..8] != MASK_MAGIC {
        return Err(Error::invalid("bad mask magic (expected DOAMASK1)"));
    }
    let k = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != 4 * k * n {
        return Err(Error::invalid(format!(
            "mask body is {} bytes, expected {} for {k}×{n}",
            body.len(),
            4 * k * n
        )));
    }
    let values: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    let weights =
        Array2::from_shape_vec((k, n), values).map_err(|e| Error::shape(e.to_string()))?;
    AttentionMask::new(weights)
}

pub fn write_mask_file(path: impl AsRef<Path>, mask: &AttentionMask) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    write_mask(std::io::BufWriter::new(f), mask)
}

pub fn read_mask_file(path: impl AsRef<Path>) -> Result<AttentionMask> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    read_mask(std::io::BufReader::new(f))
}
