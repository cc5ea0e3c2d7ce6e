//! MUSIC with per-band pseudospectrum normalization and mask-weighted
//! covariance estimation.

use std::ops::Range;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use super::{check_range, SpatialPowerSpectrum};
use crate::attention::AttentionMask;
use crate::error::{Error, Result};
use crate::geometry::SteeringMatrix;
use crate::signal::Spectrogram;

/// Bands whose summed mask weight falls below this are left out.
pub const MIN_BAND_WEIGHT: f64 = 1e-6;
const DENOMINATOR_FLOOR: f64 = 1e-12;

/// Broadband MUSIC pseudospectrum. Per bin, the mask-weighted spatial
/// covariance over `frames` is eigendecomposed; the `Q − num_sources`
/// smallest eigenvectors span the noise subspace. Each band's pseudospectrum
/// `1 / ‖E_nᴴ d‖²` is scaled to a maximum of 1, and bands are averaged with
/// weights `Σ_n M[k,n]`. Only bins with `bin_enabled[k]` contribute.
pub fn norm_music(
    y: &Spectrogram,
    mask: &AttentionMask,
    d: &SteeringMatrix,
    frames: Range<usize>,
    num_sources: usize,
    bin_enabled: Option<&[bool]>,
) -> Result<SpatialPowerSpectrum> {
    let (q, k_bins, n_frames) = y.bins().dim();
    mask.check_matches(y)?;
    check_range(&frames, n_frames)?;
    if d.num_bins() != k_bins || d.num_mics() != q {
        return Err(Error::shape(format!(
            "steering has {} bins × {} mics, spectrogram {k_bins} × {q}",
            d.num_bins(),
            d.num_mics()
        )));
    }
    if num_sources == 0 || num_sources >= q {
        return Err(Error::invalid(format!(
            "num_sources must be in 1..{q} so the noise subspace is non-empty, got {num_sources}"
        )));
    }
    if frames.len() < q {
        return Err(Error::InsufficientSamples {
            needed: q,
            got: frames.len(),
        });
    }

    let c_dirs = d.num_directions();
    let noise_dim = q - num_sources;
    let yb = y.bins();
    let m = mask.weights();
    let dv = d.values();
    let mut acc = vec![0.0; c_dirs];
    let mut total_weight = 0.0;

    for kk in 0..k_bins {
        if bin_enabled.is_some_and(|en| !en[kk]) {
            continue;
        }
        let band_weight: f64 = frames.clone().map(|nn| m[[kk, nn]]).sum();
        if band_weight < MIN_BAND_WEIGHT {
            continue;
        }
        let mut cov = DMatrix::<Complex64>::zeros(q, q);
        for nn in frames.clone() {
            let w = m[[kk, nn]];
            if w == 0.0 {
                continue;
            }
            let snap = DVector::from_iterator(q, (0..q).map(|qq| yb[[qq, kk, nn]]));
            cov += (&snap * snap.adjoint()).scale(w / band_weight);
        }
        // enforce exact Hermitian symmetry before the solver
        let cov = (&cov + cov.adjoint()).scale(0.5);
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..q).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let noise: Vec<DVector<Complex64>> = order[..noise_dim]
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect();

        let mut band = vec![0.0; c_dirs];
        for (c, slot) in band.iter_mut().enumerate() {
            let steer = DVector::from_iterator(q, (0..q).map(|qq| dv[[c, kk, qq]]));
            let denom: f64 = noise.iter().map(|e| e.dotc(&steer).norm_sqr()).sum();
            *slot = 1.0 / denom.max(DENOMINATOR_FLOOR);
        }
        let peak = band.iter().cloned().fold(0.0, f64::max);
        for (a, b) in acc.iter_mut().zip(band) {
            *a += band_weight * b / peak;
        }
        total_weight += band_weight;
    }
    if total_weight == 0.0 {
        return Err(Error::EmptyAttention);
    }
    Ok(SpatialPowerSpectrum::unnormalized(
        acc.into_iter().map(|v| v / total_weight).collect(),
    ))
}
