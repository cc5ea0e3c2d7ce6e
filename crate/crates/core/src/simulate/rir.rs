//! Shoebox-room impulse responses by the image-source method.

use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Taps of the windowed-sinc fractional-delay interpolator.
pub const FRACTIONAL_DELAY_TAPS: usize = 81;
const HALF_TAPS: i64 = (FRACTIONAL_DELAY_TAPS as i64 - 1) / 2;

pub type Point = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSpec {
    /// Length, width, height in meters.
    pub dimensions: [f64; 3],
    /// Reverberation time in seconds; 0 means anechoic.
    pub t60: f64,
}

impl RoomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dimensions.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::invalid(format!(
                "room dimensions must be positive, got {:?}",
                self.dimensions
            )));
        }
        if !(self.t60 >= 0.0 && self.t60.is_finite()) {
            return Err(Error::invalid(format!(
                "t60 must be >= 0, got {}",
                self.t60
            )));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.dimensions.iter().product()
    }

    pub fn surface(&self) -> f64 {
        let [x, y, z] = self.dimensions;
        2.0 * (x * y + x * z + y * z)
    }

    /// Uniform wall reflection coefficient from Sabine's formula.
    pub fn reflection_coefficient(&self, speed_of_sound: f64) -> Result<f64> {
        self.validate()?;
        if self.t60 == 0.0 {
            return Ok(0.0);
        }
        let alpha =
            24.0 * 10f64.ln() * self.volume() / (speed_of_sound * self.surface() * self.t60);
        if alpha > 1.0 {
            return Err(Error::invalid(format!(
                "t60 = {} s is not achievable in a {:?} m room (Sabine absorption {alpha:.3} > 1)",
                self.t60, self.dimensions
            )));
        }
        Ok((1.0 - alpha).sqrt())
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.iter()
            .zip(self.dimensions.iter())
            .all(|(&x, &l)| x > 0.0 && x < l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RirOptions {
    /// Output length in samples. `None` picks `ceil(t60·fs)`, or just past the
    /// direct path when anechoic.
    pub length: Option<usize>,
    /// Maximum reflection order. `None` keeps every image inside the length.
    pub max_order: Option<u32>,
}

/// Room impulse response per microphone plus its direct-path-only part.
#[derive(Debug, Clone, PartialEq)]
pub struct Rir {
    pub taps: Array2<f64>,
    pub direct_taps: Array2<f64>,
}

impl Rir {
    pub fn num_mics(&self) -> usize {
        self.taps.nrows()
    }

    pub fn len(&self) -> usize {
        self.taps.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.ncols() == 0
    }

    /// `taps - direct_taps`.
    pub fn reverb_taps(&self) -> Array2<f64> {
        &self.taps - &self.direct_taps
    }
}

/// Adds `gain · δ(t - delay)` to `out`, band-limited with an 81-tap
/// Hann-windowed sinc. Contributions falling outside `out` are dropped.
pub(crate) fn add_fractional_impulse(out: &mut [f64], delay: f64, gain: f64) {
    // delays within rounding noise of a whole sample are placed exactly
    if (delay - delay.round()).abs() < 1e-9 {
        let i = delay.round() as i64;
        if i >= 0 && (i as usize) < out.len() {
            out[i as usize] += gain;
        }
        return;
    }
    let centre = delay.round() as i64;
    let first = centre - HALF_TAPS;
    let width = (HALF_TAPS + 1) as f64;
    // sin(π(n-τ)) alternates sign between consecutive n; the window cosine is
    // advanced by complex rotation, so only a handful of trig calls per impulse.
    let x0 = first as f64 - delay;
    // reduce to the fractional part first: sin(π·x0) loses all precision
    // for x0 near an integer when evaluated directly
    let whole = x0.round();
    let parity = if (whole as i64) % 2 == 0 { 1.0 } else { -1.0 };
    let mut sin_num = parity * (PI * (x0 - whole)).sin();
    let step = PI / width;
    let (mut wc, mut ws) = ((step * x0).cos(), (step * x0).sin());
    let (rc, rs) = (step.cos(), step.sin());
    for i in 0..FRACTIONAL_DELAY_TAPS as i64 {
        let n = first + i;
        let x = x0 + i as f64;
        if n >= 0 && (n as usize) < out.len() {
            let window = 0.5 * (1.0 + wc);
            out[n as usize] += gain * window * sin_num / (PI * x);
        }
        sin_num = -sin_num;
        let next_c = wc * rc - ws * rs;
        ws = ws * rc + wc * rs;
        wc = next_c;
    }
}

/// Image-source room impulse responses from `source` to each microphone.
pub fn image_method_rir(
    room: &RoomSpec,
    source: &Point,
    mics: &[Point],
    sample_rate: f64,
    speed_of_sound: f64,
    options: RirOptions,
) -> Result<Rir> {
    let beta = room.reflection_coefficient(speed_of_sound)?;
    image_method_rir_with_reflection(
        room,
        source,
        mics,
        sample_rate,
        speed_of_sound,
        beta,
        options,
    )
}

/// As [`image_method_rir`] with an explicit uniform reflection coefficient.
pub fn image_method_rir_with_reflection(
    room: &RoomSpec,
    source: &Point,
    mics: &[Point],
    sample_rate: f64,
    speed_of_sound: f64,
    beta: f64,
    options: RirOptions,
) -> Result<Rir> {
    room.validate()?;
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid(format!(
            "reflection coefficient must be in [0,1], got {beta}"
        )));
    }
    if !room.contains(source) {
        return Err(Error::OutsideRoom(format!(
            "source {source:?} not inside {:?}",
            room.dimensions
        )));
    }
    if let Some(m) = mics.iter().find(|m| !room.contains(m)) {
        return Err(Error::OutsideRoom(format!(
            "microphone {m:?} not inside {:?}",
            room.dimensions
        )));
    }
    if mics.is_empty() {
        return Err(Error::EmptyInput("no microphones"));
    }

    let samples_per_meter = sample_rate / speed_of_sound;
    let length = options.length.unwrap_or_else(|| {
        if room.t60 > 0.0 {
            (room.t60 * sample_rate).ceil() as usize
        } else {
            let far = mics.iter().map(|m| dist(source, m)).fold(0.0, f64::max);
            (far * samples_per_meter).ceil() as usize + HALF_TAPS as usize + 1
        }
    });
    let mut taps = Array2::<f64>::zeros((mics.len(), length));
    let mut direct = Array2::<f64>::zeros((mics.len(), length));
    let max_order = if beta == 0.0 {
        Some(0)
    } else {
        options.max_order
    };
    let reach = (length as f64 + HALF_TAPS as f64) / samples_per_meter;
    let counts: Vec<i64> = room
        .dimensions
        .iter()
        .map(|&l| (reach / (2.0 * l)).ceil() as i64 + 1)
        .collect();

    for (mi, mic) in mics.iter().enumerate() {
        let mut row = taps.row_mut(mi);
        let row = row.as_slice_mut().expect("standard layout");
        for mx in -counts[0]..=counts[0] {
            for my in -counts[1]..=counts[1] {
                for mz in -counts[2]..=counts[2] {
                    let cells = [mx, my, mz];
                    for mirror in 0..8u8 {
                        let flips =
                            [mirror & 1, (mirror >> 1) & 1, (mirror >> 2) & 1].map(i64::from);
                        let mut order = 0i64;
                        let mut exponent = 0i64;
                        let mut d2 = 0.0;
                        for a in 0..3 {
                            let image = (1 - 2 * flips[a]) as f64 * source[a]
                                + 2.0 * cells[a] as f64 * room.dimensions[a];
                            let delta = image - mic[a];
                            d2 += delta * delta;
                            exponent += (cells[a] - flips[a]).abs() + cells[a].abs();
                            order += (2 * cells[a] - flips[a]).abs();
                        }
                        if let Some(max) = max_order {
                            if order > i64::from(max) {
                                continue;
                            }
                        }
                        let r = d2.sqrt();
                        let delay = r * samples_per_meter;
                        if delay - HALF_TAPS as f64 >= length as f64 {
                            continue;
                        }
                        let gain = beta.powi(exponent as i32) / (4.0 * PI * r);
                        if gain == 0.0 {
                            continue;
                        }
                        add_fractional_impulse(row, delay, gain);
                        if order == 0 {
                            let mut d = direct.row_mut(mi);
                            add_fractional_impulse(d.as_slice_mut().unwrap(), delay, gain);
                        }
                    }
                }
            }
        }
    }
    Ok(Rir {
        taps,
        direct_taps: direct,
    })
}

fn dist(a: &Point, b: &Point) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}
