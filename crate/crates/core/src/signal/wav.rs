//! WAV ingestion and export (16-bit PCM or 32-bit float, any channel count).

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::TimeSignal;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WavFormat {
    Pcm16,
    #[default]
    Float32,
}

/// Reads a WAV file. When `expected_rate` is given, a file at any other rate is an error.
pub fn read_wav(path: impl AsRef<Path>, expected_rate: Option<u32>) -> Result<TimeSignal> {
    let mut reader = WavReader::open(path.as_ref())?;
    let spec = reader.spec();
    if let Some(expected) = expected_rate {
        if spec.sample_rate != expected {
            return Err(Error::SampleRate {
                expected,
                found: spec.sample_rate,
            });
        }
    }
    let channels = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (fmt, bits) => {
            return Err(Error::invalid(format!(
                "unsupported WAV encoding: {fmt:?} {bits}-bit (expected 16-bit PCM or 32-bit float)"
            )))
        }
    };
    let frames = interleaved.len() / channels;
    let samples = Array2::from_shape_fn((channels, frames), |(q, t)| interleaved[t * channels + q]);
    TimeSignal::new(samples, f64::from(spec.sample_rate))
}

/// Writes a WAV file. 16-bit output is clipped to [-1, 1).
pub fn write_wav(path: impl AsRef<Path>, signal: &TimeSignal, format: WavFormat) -> Result<()> {
    let rate = signal.sample_rate();
    if rate.fract() != 0.0 || rate > f64::from(u32::MAX) {
        return Err(Error::invalid(format!(
            "cannot store sample rate {rate} in WAV"
        )));
    }
    let spec = WavSpec {
        channels: signal.num_channels() as u16,
        sample_rate: rate as u32,
        bits_per_sample: match format {
            WavFormat::Pcm16 => 16,
            WavFormat::Float32 => 32,
        },
        sample_format: match format {
            WavFormat::Pcm16 => SampleFormat::Int,
            WavFormat::Float32 => SampleFormat::Float,
        },
    };
    let mut writer = WavWriter::create(path.as_ref(), spec)?;
    let data = signal.samples();
    for t in 0..signal.len() {
        for q in 0..signal.num_channels() {
            let x = data[[q, t]];
            match format {
                WavFormat::Pcm16 => {
                    writer.write_sample((x * 32768.0).round().clamp(-32768.0, 32767.0) as i16)?
                }
                WavFormat::Float32 => writer.write_sample(x as f32)?,
            }
        }
    }
    writer.finalize()?;
    Ok(())
}
