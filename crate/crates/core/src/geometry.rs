//! Array geometry, the discrete DOA grid, and far-field steering matrices.

use std::f64::consts::PI;

use ndarray::{Array3, ArrayView1};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

/// Linear microphone array described by the distance of each microphone to
/// microphone 1 along the array axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    mic_distances: Vec<f64>,
    speed_of_sound: f64,
}

impl ArrayGeometry {
    pub fn new(mic_distances: Vec<f64>, speed_of_sound: f64) -> Result<Self> {
        if mic_distances.len() < 2 {
            return Err(Error::invalid("array needs at least two microphones"));
        }
        if mic_distances[0] != 0.0 {
            return Err(Error::invalid("first microphone distance must be 0"));
        }
        if mic_distances
            .windows(2)
            .any(|w| !(w[1] > w[0]) || !w[1].is_finite())
        {
            return Err(Error::invalid(
                "microphone distances must be strictly increasing",
            ));
        }
        if !(speed_of_sound > 0.0 && speed_of_sound.is_finite()) {
            return Err(Error::invalid(format!(
                "speed of sound must be positive, got {speed_of_sound}"
            )));
        }
        Ok(Self {
            mic_distances,
            speed_of_sound,
        })
    }

    /// Uniform linear array with `num_mics` microphones `spacing` meters apart.
    pub fn uniform(num_mics: usize, spacing: f64, speed_of_sound: f64) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(Error::invalid(format!(
                "mic spacing must be positive, got {spacing}"
            )));
        }
        Self::new(
            (0..num_mics).map(|q| q as f64 * spacing).collect(),
            speed_of_sound,
        )
    }

    pub fn mic_distances(&self) -> &[f64] {
        &self.mic_distances
    }

    pub fn num_mics(&self) -> usize {
        self.mic_distances.len()
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.speed_of_sound
    }

    pub fn aperture(&self) -> f64 {
        *self.mic_distances.last().unwrap()
    }

    /// Frequency above which the closest microphone pair aliases spatially.
    pub fn aliasing_frequency(&self) -> f64 {
        let min_gap = self
            .mic_distances
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        self.speed_of_sound / (2.0 * min_gap)
    }

    /// Geometry with the microphone order reversed, re-referenced to the new first mic.
    pub fn reversed(&self) -> Self {
        let ap = self.aperture();
        Self {
            mic_distances: self.mic_distances.iter().rev().map(|d| ap - d).collect(),
            speed_of_sound: self.speed_of_sound,
        }
    }
}

/// Uniform linear array as declared in JSON configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub num_mics: usize,
    pub mic_spacing_m: f64,
    #[serde(default = "default_speed")]
    pub speed_of_sound: f64,
}

fn default_speed() -> f64 {
    DEFAULT_SPEED_OF_SOUND
}

impl Default for ArrayConfig {
    /// Four microphones, 8 cm apart.
    fn default() -> Self {
        Self {
            num_mics: 4,
            mic_spacing_m: 0.08,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
        }
    }
}

impl ArrayConfig {
    pub fn to_geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::uniform(self.num_mics, self.mic_spacing_m, self.speed_of_sound)
    }
}

/// Candidate directions in degrees, strictly increasing from 0 to 180.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoaGrid {
    angles: Vec<f64>,
}

impl DoaGrid {
    /// `count` equally spaced directions covering [0°, 180°].
    pub fn uniform(count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::invalid(format!(
                "DOA grid needs at least 2 points, got {count}"
            )));
        }
        let step = 180.0 / (count - 1) as f64;
        let mut angles: Vec<f64> = (0..count).map(|c| c as f64 * step).collect();
        angles[count - 1] = 180.0;
        Ok(Self { angles })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn angle(&self, c: usize) -> f64 {
        self.angles[c]
    }

    /// Index of the grid point closest to `theta`. Exact midpoints go to the
    /// higher index (round half up).
    pub fn nearest_index(&self, theta: f64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (c, &a) in self.angles.iter().enumerate() {
            let d = (a - theta).abs();
            if d <= best_dist {
                best = c;
                best_dist = d;
            } else {
                break;
            }
        }
        best
    }
}

/// cos of an angle in degrees, exact at 90° and antisymmetric about it.
pub(crate) fn cos_deg(theta: f64) -> f64 {
    if theta > 90.0 {
        -cos_deg(180.0 - theta)
    } else if theta == 90.0 {
        0.0
    } else {
        theta.to_radians().cos()
    }
}

/// Far-field relative transfer functions w.r.t. microphone 1, `C × K × Q`:
/// `exp(-j·2π·f_k·cos θ_c·d_q / c_s)` with `f_k = k·fs/fft_length`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringMatrix {
    values: Array3<Complex64>,
}

impl SteeringMatrix {
    pub fn new(
        grid: &DoaGrid,
        geometry: &ArrayGeometry,
        num_bins: usize,
        sample_rate: f64,
        fft_length: usize,
    ) -> Result<Self> {
        if num_bins != fft_length / 2 + 1 {
            return Err(Error::invalid(format!(
                "{num_bins} bins inconsistent with FFT length {fft_length}"
            )));
        }
        let d = geometry.mic_distances();
        let cs = geometry.speed_of_sound();
        let cosines: Vec<f64> = grid.angles().iter().map(|&a| cos_deg(a)).collect();
        let values = Array3::from_shape_fn((grid.len(), num_bins, d.len()), |(c, k, q)| {
            if q == 0 {
                return Complex64::new(1.0, 0.0);
            }
            let f = k as f64 * sample_rate / fft_length as f64;
            let phase = -2.0 * PI * f * cosines[c] * d[q] / cs;
            Complex64::from_polar(1.0, phase)
        });
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array3<Complex64> {
        &self.values
    }

    pub fn num_directions(&self) -> usize {
        self.values.dim().0
    }

    pub fn num_bins(&self) -> usize {
        self.values.dim().1
    }

    pub fn num_mics(&self) -> usize {
        self.values.dim().2
    }

    /// Steering vector for direction `c` at bin `k`.
    pub fn vector(&self, c: usize, k: usize) -> ArrayView1<'_, Complex64> {
        self.values.slice(ndarray::s![c, k, ..])
    }
}
