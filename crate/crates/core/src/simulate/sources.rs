//! Seeded synthetic source signals.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::signal::TimeSignal;

/// i.i.d. standard normal samples.
pub fn white_noise(
    channels: usize,
    length: usize,
    seed: u64,
    sample_rate: f64,
) -> Result<TimeSignal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples =
        Array2::from_shape_simple_fn((channels, length), || rng.sample::<f64, _>(StandardNormal));
    TimeSignal::new(samples, sample_rate)
}

/// Source waveform used by a simulated scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSignal {
    /// Spectrally flat Gaussian noise.
    WhiteNoise,
    /// Formant-filtered voiced/unvoiced excitation with syllable-rate gating.
    SpeechLike,
    /// Harmonic tone complex with a slowly drifting fundamental.
    Harmonic,
    /// First channel of a WAV file.
    Wav { path: std::path::PathBuf },
}

impl SourceSignal {
    pub fn label(&self) -> &'static str {
        match self {
            SourceSignal::WhiteNoise => "white_noise",
            SourceSignal::SpeechLike => "speech_like",
            SourceSignal::Harmonic => "harmonic",
            SourceSignal::Wav { .. } => "wav",
        }
    }
}

// (F1, F2, F3) in Hz for a handful of vowels.
const VOWELS: [[f64; 3]; 6] = [
    [730.0, 1090.0, 2440.0],
    [270.0, 2290.0, 3010.0],
    [530.0, 1840.0, 2480.0],
    [570.0, 840.0, 2410.0],
    [300.0, 870.0, 2240.0],
    [660.0, 1720.0, 2410.0],
];

/// Two-pole resonator, unity peak gain.
struct Resonator {
    a1: f64,
    a2: f64,
    gain: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new(freq: f64, bandwidth: f64, fs: f64) -> Self {
        let r = (-PI * bandwidth / fs).exp();
        let theta = 2.0 * PI * freq / fs;
        Self {
            a1: 2.0 * r * theta.cos(),
            a2: -r * r,
            gain: 1.0 - r,
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn retune(&mut self, freq: f64, bandwidth: f64, fs: f64) {
        let fresh = Self::new(freq, bandwidth, fs);
        self.a1 = fresh.a1;
        self.a2 = fresh.a2;
        self.gain = fresh.gain;
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = self.gain * x + self.a1 * self.y1 + self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// Speech-like test signal: syllables of 120–300 ms separated by short
/// pauses, each a vowel (three formant resonators over a jittered glottal
/// pulse train plus aspiration noise) or, occasionally, a fricative burst.
pub fn speech_like(length: usize, seed: u64, sample_rate: f64) -> Result<TimeSignal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = sample_rate;
    let mut out = vec![0.0; length];
    let mut formants: Vec<Resonator> = VOWELS[0]
        .iter()
        .map(|&f| Resonator::new(f, 80.0, fs))
        .collect();
    let mut fricative = Resonator::new(4500.0, 2000.0, fs);
    let base_f0 = rng.gen_range(95.0..220.0);

    let mut t = 0usize;
    while t < length {
        let syllable = (rng.gen_range(0.12..0.30) * fs) as usize;
        let pause = (rng.gen_range(0.03..0.15) * fs) as usize;
        let voiced = rng.gen_bool(0.85);
        let vowel = VOWELS[rng.gen_range(0..VOWELS.len())];
        for (res, &f) in formants.iter_mut().zip(vowel.iter()) {
            res.retune(f * rng.gen_range(0.9..1.1), 60.0 + f * 0.05, fs);
        }
        let f0_start = base_f0 * rng.gen_range(0.85..1.15);
        let f0_end = base_f0 * rng.gen_range(0.85..1.15);
        let level = rng.gen_range(0.5..1.0);
        let mut phase = 0.0;
        for i in 0..syllable.min(length - t) {
            let progress = i as f64 / syllable as f64;
            let env = level * (PI * progress).sin().powf(0.6);
            let sample = if voiced {
                let f0 = f0_start + (f0_end - f0_start) * progress;
                phase += f0 / fs;
                let pulse = if phase >= 1.0 {
                    phase -= 1.0;
                    1.0
                } else {
                    0.0
                };
                let excitation = pulse * 8.0 + 0.05 * rng.sample::<f64, _>(StandardNormal);
                formants
                    .iter_mut()
                    .enumerate()
                    .map(|(j, r)| r.step(excitation) / (j + 1) as f64)
                    .sum::<f64>()
            } else {
                fricative.step(rng.sample::<f64, _>(StandardNormal)) * 0.6
            };
            out[t + i] = env * sample;
        }
        t += syllable + pause;
    }
    TimeSignal::mono(&out, sample_rate)
}

/// Tonal interference: harmonics of a drifting fundamental, 1/h amplitudes,
/// band-limited to 5 kHz, with slow tremolo.
pub fn harmonic(length: usize, seed: u64, sample_rate: f64) -> Result<TimeSignal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f0 = rng.gen_range(80.0..320.0);
    let drift = rng.gen_range(-0.05..0.05);
    let tremolo = rng.gen_range(1.0..5.0);
    let harmonics = ((5000.0 / f0) as usize).max(1);
    let phases: Vec<f64> = (0..harmonics)
        .map(|_| rng.gen_range(0.0..2.0 * PI))
        .collect();
    let duration = length as f64 / sample_rate;
    let mut out = vec![0.0; length];
    let mut base_phase = 0.0;
    for (t, slot) in out.iter_mut().enumerate() {
        let time = t as f64 / sample_rate;
        let f = f0 * (1.0 + drift * time / duration.max(1e-9));
        base_phase += 2.0 * PI * f / sample_rate;
        let env = 0.75 + 0.25 * (2.0 * PI * tremolo * time).sin();
        let mut s = 0.0;
        for (h, ph) in phases.iter().enumerate() {
            s += (((h + 1) as f64) * base_phase + ph).sin() / (h + 1) as f64;
        }
        *slot = env * s;
    }
    TimeSignal::mono(&out, sample_rate)
}
