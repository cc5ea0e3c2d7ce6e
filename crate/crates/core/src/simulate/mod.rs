//! Reverberant multi-source scene simulation with ground-truth decomposition.
//!
//! A scene is a sum of per-source direct-path images, per-source reverberant
//! tails, and sensor noise:
//!
//! ```text
//! mixture = Σ_i (direct_i + reverb_i) + noise
//! ```
//!
//! Every component is kept so that oracle masks and clean-reference spectra
//! can be computed downstream. Generation is fully determined by `seed`.

use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2, Axis};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cos_deg, ArrayConfig, ArrayGeometry};
use crate::signal::wav::{read_wav, write_wav, WavFormat};
use crate::signal::{StftConfig, TimeSignal};

pub mod rir;
pub mod sources;

pub use rir::{
    image_method_rir, image_method_rir_with_reflection, Point, Rir, RirOptions, RoomSpec,
};
pub use sources::{harmonic, speech_like, white_noise, SourceSignal};

use rir::add_fractional_impulse;

/// Delays each channel of a far-field plane wave: channel `q` is `src`
/// delayed by `cos(doa)·d_q/c_s` seconds, without attenuation.
pub fn plane_wave_synthesize(
    src: &TimeSignal,
    doa: f64,
    geometry: &ArrayGeometry,
) -> Result<TimeSignal> {
    if src.num_channels() != 1 {
        return Err(Error::invalid(format!(
            "plane-wave source must be single-channel, got {} channels",
            src.num_channels()
        )));
    }
    let fs = src.sample_rate();
    let x = src.channel(0);
    let len = src.len();
    let mut out = Array2::<f64>::zeros((geometry.num_mics(), len));
    for (q, &d) in geometry.mic_distances().iter().enumerate() {
        let delay = cos_deg(doa) * d / geometry.speed_of_sound() * fs;
        let mut kernel = vec![0.0; rir::FRACTIONAL_DELAY_TAPS + 2];
        // kernel centred at index `offset`, so negative delays stay representable
        let shift = delay.round();
        let offset = (rir::FRACTIONAL_DELAY_TAPS / 2) as f64;
        add_fractional_impulse(&mut kernel, offset + (delay - shift), 1.0);
        let lag = shift as i64 - offset as i64;
        let mut row = out.row_mut(q);
        for (j, &h) in kernel.iter().enumerate() {
            if h == 0.0 {
                continue;
            }
            let total = j as i64 + lag;
            for t in 0..len {
                let s = t as i64 - total;
                if s >= 0 && (s as usize) < len {
                    row[t] += h * x[s as usize];
                }
            }
        }
    }
    TimeSignal::new(out, fs)
}

/// Linear convolution of `x` with each row of `filters`, truncated to `out_len`.
pub fn convolve_rows(x: &[f64], filters: ArrayView2<'_, f64>, out_len: usize) -> Array2<f64> {
    let rows = filters.nrows();
    let mut out = Array2::<f64>::zeros((rows, out_len));
    if x.is_empty() || filters.ncols() == 0 || out_len == 0 {
        return out;
    }
    let full = x.len() + filters.ncols() - 1;
    let n = full.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let mut xs: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    xs.resize(n, Complex64::new(0.0, 0.0));
    fwd.process(&mut xs);
    for (r, filt) in filters.axis_iter(Axis(0)).enumerate() {
        let mut hs: Vec<Complex64> = filt.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        hs.resize(n, Complex64::new(0.0, 0.0));
        fwd.process(&mut hs);
        for (h, xv) in hs.iter_mut().zip(xs.iter()) {
            *h *= xv;
        }
        inv.process(&mut hs);
        for t in 0..out_len.min(full) {
            out[[r, t]] = hs[t].re / n as f64;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Propagation {
    /// Image-method room simulation with seeded array placement.
    #[default]
    Image,
    /// Ideal far-field plane waves, no room.
    PlaneWave,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    /// Direction of arrival in degrees, [0, 180].
    pub doa: f64,
    /// Source to array-centre distance in meters.
    #[serde(default = "default_smd")]
    pub smd: f64,
    pub signal: SourceSignal,
}

fn default_smd() -> f64 {
    1.5
}

fn default_sample_rate() -> f64 {
    16_000.0
}

fn default_margin() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub room: RoomSpec,
    pub array: ArrayConfig,
    pub sources: Vec<SourceSpec>,
    /// Sensor SNR vs. source 1 at microphone 1; absent disables noise.
    #[serde(default)]
    pub snr_db: Option<f64>,
    /// Source 1 vs. source 2 energy ratio at microphone 1.
    #[serde(default)]
    pub sir_db: f64,
    pub seed: u64,
    pub duration_frames: usize,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: f64,
    #[serde(default)]
    pub stft: StftConfig,
    #[serde(default)]
    pub propagation: Propagation,
    /// Minimum distance from every microphone and source to any wall.
    #[serde(default = "default_margin")]
    pub wall_margin_m: f64,
}

impl SceneSpec {
    pub fn num_samples(&self) -> usize {
        self.stft.samples_for_frames(self.duration_frames)
    }

    pub fn validate(&self) -> Result<()> {
        self.room.validate()?;
        self.stft.validate()?;
        if self.sources.is_empty() || self.sources.len() > 2 {
            return Err(Error::invalid(format!(
                "scenes hold 1 or 2 sources, got {}",
                self.sources.len()
            )));
        }
        for s in &self.sources {
            if !(0.0..=180.0).contains(&s.doa) {
                return Err(Error::invalid(format!("DOA {} outside [0, 180]", s.doa)));
            }
            if !(s.smd > 0.0) {
                return Err(Error::invalid(format!(
                    "source distance must be positive, got {}",
                    s.smd
                )));
            }
        }
        if self.duration_frames == 0 {
            return Err(Error::invalid("duration_frames must be >= 1"));
        }
        if !self.sir_db.is_finite() || self.snr_db.is_some_and(|s| !s.is_finite()) {
            return Err(Error::invalid(
                "SIR/SNR must be finite (omit snr_db to disable noise)",
            ));
        }
        Ok(())
    }
}

/// Microphone and source coordinates of an image-method scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub array_center: Point,
    /// Azimuth of the array axis (the θ = 0 direction) in degrees.
    pub axis_azimuth_deg: f64,
    pub mic_positions: Vec<Point>,
    pub source_positions: Vec<Point>,
}

fn inside_with_margin(room: &RoomSpec, p: &Point, margin: f64) -> bool {
    p.iter()
        .zip(room.dimensions.iter())
        .all(|(&x, &l)| x >= margin && x <= l - margin)
}

/// Seeded uniform array placement with random rotation about the vertical
/// axis; sources lie in the array's horizontal plane.
pub fn place_array(
    room: &RoomSpec,
    geometry: &ArrayGeometry,
    sources: &[SourceSpec],
    margin: f64,
    rng: &mut impl Rng,
) -> Result<Placement> {
    const ATTEMPTS: usize = 10_000;
    let [lx, ly, lz] = room.dimensions;
    if lx <= 2.0 * margin || ly <= 2.0 * margin || lz <= 2.0 * margin {
        return Err(Error::OutsideRoom(format!(
            "room {:?} leaves no space for a {margin} m wall margin",
            room.dimensions
        )));
    }
    let d = geometry.mic_distances();
    let mean_d = d.iter().sum::<f64>() / d.len() as f64;
    for _ in 0..ATTEMPTS {
        let center = [
            rng.gen_range(margin..lx - margin),
            rng.gen_range(margin..ly - margin),
            rng.gen_range(margin..=lz - margin),
        ];
        let phi: f64 = rng.gen_range(0.0..360.0);
        let (s, c) = phi.to_radians().sin_cos();
        let axis = [c, s, 0.0];
        let perp = [-s, c, 0.0];
        let mics: Vec<Point> = d
            .iter()
            .map(|&dq| std::array::from_fn(|a| center[a] + (mean_d - dq) * axis[a]))
            .collect();
        let srcs: Vec<Point> = sources
            .iter()
            .map(|src| {
                let (st, ct) = (src.doa.to_radians().sin(), cos_deg(src.doa));
                std::array::from_fn(|a| center[a] + src.smd * (ct * axis[a] + st * perp[a]))
            })
            .collect();
        if mics
            .iter()
            .chain(srcs.iter())
            .all(|p| inside_with_margin(room, p, margin))
        {
            return Ok(Placement {
                array_center: center,
                axis_azimuth_deg: phi,
                mic_positions: mics,
                source_positions: srcs,
            });
        }
    }
    Err(Error::OutsideRoom(format!(
        "could not place array and sources in {:?} with a {margin} m margin",
        room.dimensions
    )))
}

/// Ground-truth decomposition of a simulated scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneTruth {
    pub mixture: TimeSignal,
    pub direct: Vec<TimeSignal>,
    pub reverb: Vec<TimeSignal>,
    pub noise: TimeSignal,
    pub doas: Vec<f64>,
    /// Amplitude factor applied to each source signal.
    pub gains: Vec<f64>,
    pub placement: Option<Placement>,
}

impl SceneTruth {
    /// Direct plus reverberant image of source `i`.
    pub fn source_image(&self, i: usize) -> Array2<f64> {
        &self.direct[i].samples() + &self.reverb[i].samples()
    }

    pub fn measured_sir_db(&self) -> Option<f64> {
        if self.direct.len() < 2 {
            return None;
        }
        let e = |i: usize| {
            self.source_image(i)
                .row(0)
                .iter()
                .map(|x| x * x)
                .sum::<f64>()
        };
        Some(10.0 * (e(0) / e(1)).log10())
    }

    pub fn measured_snr_db(&self) -> f64 {
        let s: f64 = self.source_image(0).row(0).iter().map(|x| x * x).sum();
        let n = self.noise.channel_energy(0);
        10.0 * (s / n).log10()
    }
}

fn energy_mic1(a: &Array2<f64>) -> f64 {
    a.row(0).iter().map(|x| x * x).sum()
}

fn source_waveform(spec: &SourceSignal, len: usize, seed: u64, fs: f64) -> Result<Vec<f64>> {
    let sig = match spec {
        SourceSignal::WhiteNoise => white_noise(1, len, seed, fs)?,
        SourceSignal::SpeechLike => speech_like(len, seed, fs)?,
        SourceSignal::Harmonic => harmonic(len, seed, fs)?,
        SourceSignal::Wav { path } => {
            let s = read_wav(path, Some(fs as u32))?;
            if s.len() < len {
                return Err(Error::InsufficientSamples {
                    needed: len,
                    got: s.len(),
                });
            }
            return Ok(s.channel(0).iter().take(len).copied().collect());
        }
    };
    Ok(sig.channel(0).to_vec())
}

/// Simulates a scene: convolves each source with its direct-path and full
/// RIR, sets source 2 to the requested SIR and the sensor noise to the
/// requested SNR (both at microphone 1), and sums the components.
pub fn mix_scene(spec: &SceneSpec) -> Result<SceneTruth> {
    spec.validate()?;
    let geometry = spec.array.to_geometry()?;
    let fs = spec.sample_rate;
    let len = spec.num_samples();
    let q = geometry.num_mics();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let source_seeds: Vec<u64> = spec.sources.iter().map(|_| rng.gen()).collect();
    let noise_seed: u64 = rng.gen();

    let waves: Vec<Vec<f64>> = spec
        .sources
        .iter()
        .zip(&source_seeds)
        .map(|(s, &seed)| source_waveform(&s.signal, len, seed, fs))
        .collect::<Result<_>>()?;
    for (i, w) in waves.iter().enumerate() {
        if w.iter().all(|&x| x == 0.0) {
            return Err(Error::ZeroEnergySource(i));
        }
    }

    let mut direct = Vec::with_capacity(waves.len());
    let mut reverb = Vec::with_capacity(waves.len());
    let placement = match spec.propagation {
        Propagation::PlaneWave => {
            for (w, s) in waves.iter().zip(&spec.sources) {
                let src = TimeSignal::mono(w, fs)?;
                direct.push(plane_wave_synthesize(&src, s.doa, &geometry)?.into_samples());
                reverb.push(Array2::<f64>::zeros((q, len)));
            }
            None
        }
        Propagation::Image => {
            let placement = place_array(
                &spec.room,
                &geometry,
                &spec.sources,
                spec.wall_margin_m,
                &mut rng,
            )?;
            for (w, pos) in waves.iter().zip(&placement.source_positions) {
                let rir = image_method_rir(
                    &spec.room,
                    pos,
                    &placement.mic_positions,
                    fs,
                    geometry.speed_of_sound(),
                    RirOptions::default(),
                )?;
                direct.push(convolve_rows(w, rir.direct_taps.view(), len));
                reverb.push(convolve_rows(w, rir.reverb_taps().view(), len));
            }
            Some(placement)
        }
    };

    let mut gains = vec![1.0; waves.len()];
    let e0 = energy_mic1(&(&direct[0] + &reverb[0]));
    if e0 == 0.0 {
        return Err(Error::ZeroEnergySource(0));
    }
    if waves.len() == 2 {
        let e1 = energy_mic1(&(&direct[1] + &reverb[1]));
        if e1 == 0.0 {
            return Err(Error::ZeroEnergySource(1));
        }
        let g = (e0 / (e1 * 10f64.powf(spec.sir_db / 10.0))).sqrt();
        direct[1] *= g;
        reverb[1] *= g;
        gains[1] = g;
    }

    let noise = match spec.snr_db {
        Some(snr) => {
            let mut n = white_noise(q, len, noise_seed, fs)?.into_samples();
            let en = energy_mic1(&n);
            n *= (e0 / (en * 10f64.powf(snr / 10.0))).sqrt();
            n
        }
        None => Array2::zeros((q, len)),
    };

    let mut mixture = Array2::<f64>::zeros((q, len));
    for (d, r) in direct.iter().zip(&reverb) {
        mixture += &(d + r);
    }
    mixture += &noise;

    let wrap = |a: Array2<f64>| TimeSignal::new(a, fs);
    Ok(SceneTruth {
        mixture: wrap(mixture)?,
        direct: direct.into_iter().map(wrap).collect::<Result<_>>()?,
        reverb: reverb.into_iter().map(wrap).collect::<Result<_>>()?,
        noise: wrap(noise)?,
        doas: spec.sources.iter().map(|s| s.doa).collect(),
        gains,
        placement,
    })
}

/// Ground-truth sidecar written next to the scene WAV files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthSidecar {
    pub spec: SceneSpec,
    pub doas: Vec<f64>,
    pub gains: Vec<f64>,
    pub measured_sir_db: Option<f64>,
    pub measured_snr_db: Option<f64>,
    pub placement: Option<Placement>,
    pub files: Vec<String>,
}

pub const MIXTURE_FILE: &str = "mixture.wav";
pub const TRUTH_FILE: &str = "truth.json";

pub fn direct_file_name(source: usize) -> String {
    format!("source{}_direct.wav", source + 1)
}

/// Writes `mixture.wav`, per-source direct/reverb WAVs, `noise.wav` and `truth.json` into `dir`.
pub fn export_bundle(dir: &Path, spec: &SceneSpec, truth: &SceneTruth) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|source| Error::File {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files = vec![(MIXTURE_FILE.to_string(), &truth.mixture)];
    for (i, (d, r)) in truth.direct.iter().zip(&truth.reverb).enumerate() {
        files.push((direct_file_name(i), d));
        files.push((format!("source{}_reverb.wav", i + 1), r));
    }
    files.push(("noise.wav".to_string(), &truth.noise));
    let mut written = Vec::new();
    for (name, sig) in &files {
        let p = dir.join(name);
        write_wav(&p, sig, WavFormat::Float32)?;
        written.push(p);
    }
    let sidecar = TruthSidecar {
        spec: spec.clone(),
        doas: truth.doas.clone(),
        gains: truth.gains.clone(),
        measured_sir_db: truth.measured_sir_db(),
        measured_snr_db: spec.snr_db.map(|_| truth.measured_snr_db()),
        placement: truth.placement.clone(),
        files: files.iter().map(|(n, _)| n.clone()).collect(),
    };
    let p = dir.join(TRUTH_FILE);
    std::fs::write(&p, serde_json::to_string_pretty(&sidecar)? + "\n").map_err(|source| {
        Error::File {
            path: p.clone(),
            source,
        }
    })?;
    written.push(p);
    Ok(written)
}
