//! Steered response power with (mask-modified) PHAT weighting.

use std::ops::Range;

use ndarray::{Array2, Array3, Array4};
use num_complex::Complex64;

use super::{check_range, NarrowbandSpectra, SpatialPowerSpectrum};
use crate::attention::AttentionMask;
use crate::error::{Error, Result};
use crate::geometry::SteeringMatrix;
use crate::signal::Spectrogram;

/// Non-negative per-bin weights, `Q × K × N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhatWeighting {
    values: Array3<f64>,
}

impl PhatWeighting {
    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }
}

/// `1/|Y|` where `|Y| > epsilon`, otherwise `epsilon`.
pub fn phat_weighting(y: &Spectrogram, epsilon: f64) -> Result<PhatWeighting> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let values = y.bins().mapv(|z| {
        let m = z.norm();
        if m > epsilon {
            1.0 / m
        } else {
            epsilon
        }
    });
    Ok(PhatWeighting { values })
}

/// Multiplies the weighting by the mask, broadcast over channels.
pub fn mask_weighting(w: &PhatWeighting, mask: &AttentionMask) -> Result<PhatWeighting> {
    let (q, k, n) = w.values.dim();
    if mask.dim() != (k, n) {
        return Err(Error::shape(format!(
            "mask {:?} vs weighting {k} bins × {n} frames",
            mask.dim()
        )));
    }
    let m = mask.weights();
    let values = Array3::from_shape_fn((q, k, n), |(qq, kk, nn)| {
        w.values[[qq, kk, nn]] * m[[kk, nn]]
    });
    Ok(PhatWeighting { values })
}

/// Weighted cross-spectra `Φ[k,n,q1,q2] = Y[q1]·W[q1]·W[q2]·conj(Y[q2])`, `K × N × Q × Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSpectralTensor {
    values: Array4<Complex64>,
}

impl CrossSpectralTensor {
    pub fn values(&self) -> &Array4<Complex64> {
        &self.values
    }

    pub fn num_bins(&self) -> usize {
        self.values.dim().0
    }

    pub fn num_frames(&self) -> usize {
        self.values.dim().1
    }

    pub fn num_mics(&self) -> usize {
        self.values.dim().2
    }
}

pub fn cross_spectral_tensor(y: &Spectrogram, w: &PhatWeighting) -> Result<CrossSpectralTensor> {
    let (q, k, n) = y.bins().dim();
    if w.values.dim() != (q, k, n) {
        return Err(Error::shape(format!(
            "weighting {:?} vs spectrogram {:?}",
            w.values.dim(),
            (q, k, n)
        )));
    }
    let mut values = Array4::<Complex64>::zeros((k, n, q, q));
    let yb = y.bins();
    for kk in 0..k {
        for nn in 0..n {
            for q1 in 0..q {
                let a = yb[[q1, kk, nn]] * w.values[[q1, kk, nn]];
                values[[kk, nn, q1, q1]] = Complex64::new(a.norm_sqr(), 0.0);
                for q2 in q1 + 1..q {
                    let b = yb[[q2, kk, nn]] * w.values[[q2, kk, nn]];
                    let v = a * b.conj();
                    values[[kk, nn, q1, q2]] = v;
                    values[[kk, nn, q2, q1]] = v.conj();
                }
            }
        }
    }
    Ok(CrossSpectralTensor { values })
}

fn check_steering(phi: &CrossSpectralTensor, d: &SteeringMatrix) -> Result<()> {
    if d.num_bins() != phi.num_bins() || d.num_mics() != phi.num_mics() {
        return Err(Error::shape(format!(
            "steering has {} bins × {} mics, cross-spectra {} bins × {} mics",
            d.num_bins(),
            d.num_mics(),
            phi.num_bins(),
            phi.num_mics()
        )));
    }
    Ok(())
}

fn pair_divisor(frames: usize, bins: usize, mics: usize) -> f64 {
    let qm1 = (mics - 1) as f64;
    frames as f64 * bins as f64 * qm1 * qm1
}

/// Steered response power over `frames`, unnormalized:
/// `Σ_n Σ_k Σ_{q<j} 2·Re{conj(D[c,k,q])·Φ[k,n,q,j]·D[c,k,j]} / (N·K·(Q−1)²)`.
///
/// The steering vector enters as a matched filter (`D^H y`), so a plane wave
/// whose inter-channel phases equal `D[c]` peaks at `c`.
pub fn srp(
    phi: &CrossSpectralTensor,
    d: &SteeringMatrix,
    frames: Range<usize>,
) -> Result<SpatialPowerSpectrum> {
    check_steering(phi, d)?;
    check_range(&frames, phi.num_frames())?;
    let (k_bins, _, q, _) = phi.values.dim();
    let pairs: Vec<(usize, usize)> = (0..q)
        .flat_map(|a| (a + 1..q).map(move |b| (a, b)))
        .collect();

    // The steering does not depend on n, so frames are summed first.
    let mut summed = Array2::<Complex64>::zeros((k_bins, pairs.len()));
    for kk in 0..k_bins {
        for (p, &(a, b)) in pairs.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for nn in frames.clone() {
                acc += phi.values[[kk, nn, a, b]];
            }
            summed[[kk, p]] = acc;
        }
    }
    let divisor = pair_divisor(frames.len(), k_bins, q);
    let dv = d.values();
    let values = (0..d.num_directions())
        .map(|c| {
            let mut acc = 0.0;
            for kk in 0..k_bins {
                for (p, &(a, b)) in pairs.iter().enumerate() {
                    acc += 2.0 * (dv[[c, kk, a]].conj() * summed[[kk, p]] * dv[[c, kk, b]]).re;
                }
            }
            acc / divisor
        })
        .collect();
    Ok(SpatialPowerSpectrum::unnormalized(values))
}

/// Per-bin terms of [`srp`] (same divisor), `C × K × N_range`; summing over
/// bins and frames gives the [`srp`] output.
pub fn narrowband_srp(
    phi: &CrossSpectralTensor,
    d: &SteeringMatrix,
    frames: Range<usize>,
) -> Result<NarrowbandSpectra> {
    check_steering(phi, d)?;
    check_range(&frames, phi.num_frames())?;
    let (k_bins, _, q, _) = phi.values.dim();
    let divisor = pair_divisor(frames.len(), k_bins, q);
    let dv = d.values();
    let n0 = frames.start;
    let mut values = Array3::<f64>::zeros((d.num_directions(), k_bins, frames.len()));
    for c in 0..d.num_directions() {
        for kk in 0..k_bins {
            for nn in frames.clone() {
                let mut acc = 0.0;
                for a in 0..q {
                    let left = dv[[c, kk, a]].conj();
                    for b in a + 1..q {
                        acc += 2.0 * (left * phi.values[[kk, nn, a, b]] * dv[[c, kk, b]]).re;
                    }
                }
                values[[c, kk, nn - n0]] = acc / divisor;
            }
        }
    }
    Ok(NarrowbandSpectra::new(values))
}

/// Mask-weighted average of narrowband spectra:
/// `Ē[c] = Σ_{k,n} M[k,n]·E[c,k,n] / Σ_{k,n} M[k,n]`.
pub fn output_masking(
    nb: &NarrowbandSpectra,
    mask: &AttentionMask,
) -> Result<SpatialPowerSpectrum> {
    let (c_dirs, k, n) = nb.values().dim();
    if mask.dim() != (k, n) {
        return Err(Error::shape(format!(
            "mask {:?} vs narrowband {k} bins × {n} frames",
            mask.dim()
        )));
    }
    let total = mask.total();
    if !(total > 0.0) {
        return Err(Error::EmptyAttention);
    }
    let m = mask.weights();
    let v = nb.values();
    let values = (0..c_dirs)
        .map(|c| {
            let mut acc = 0.0;
            for kk in 0..k {
                for nn in 0..n {
                    acc += m[[kk, nn]] * v[[c, kk, nn]];
                }
            }
            acc / total
        })
        .collect();
    Ok(SpatialPowerSpectrum::unnormalized(values))
}
