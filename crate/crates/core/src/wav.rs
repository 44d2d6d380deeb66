//! Mono 16 kHz WAV I/O: PCM16 or float32 in, float32 or PCM16 out.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::dsp::Waveform;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const REQUIRED_SAMPLE_RATE: u32 = 16_000;

/// Sample encoding for written files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WavEncoding {
    #[default]
    Float32,
    Pcm16,
}

fn unsupported(path: &Path, msg: impl Into<String>) -> Error {
    Error::UnsupportedAudio {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

fn check_spec(path: &Path, spec: &WavSpec) -> Result<()> {
    if spec.channels != 1 {
        return Err(unsupported(path, format!("{} channels, expected mono", spec.channels)));
    }
    if spec.sample_rate != REQUIRED_SAMPLE_RATE {
        return Err(unsupported(
            path,
            format!(
                "sample rate {} Hz, expected {REQUIRED_SAMPLE_RATE} Hz",
                spec.sample_rate
            ),
        ));
    }
    match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) | (SampleFormat::Float, 32) => Ok(()),
        (fmt, bits) => Err(unsupported(
            path,
            format!("{fmt:?} {bits}-bit samples, expected PCM16 or float32"),
        )),
    }
}

/// Header-only check used when validating manifests.
pub fn probe(path: &Path) -> Result<WavSpec> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let spec = WavReader::open(path)?.spec();
    check_spec(path, &spec)?;
    Ok(spec)
}

pub fn read_wav<T: Scalar>(path: &Path) -> Result<Waveform<T>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = WavReader::open(path)?;
    let spec = reader.spec();
    check_spec(path, &spec)?;
    let samples: Vec<T> = match spec.sample_format {
        SampleFormat::Int => reader
            .samples::<i16>()
            .map(|s| s.map(|v| T::of(v as f64 / 32768.0)))
            .collect::<std::result::Result<_, _>>()?,
        SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(|v| T::of(v as f64)))
            .collect::<std::result::Result<_, _>>()?,
    };
    Waveform::new(samples, spec.sample_rate).map_err(|e| unsupported(path, e.to_string()))
}

/// Writes `w`, clamping to ±1.0. Returns the number of clamped samples.
pub fn write_wav<T: Scalar>(path: &Path, w: &Waveform<T>, encoding: WavEncoding) -> Result<usize> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: match encoding {
            WavEncoding::Float32 => 32,
            WavEncoding::Pcm16 => 16,
        },
        sample_format: match encoding {
            WavEncoding::Float32 => SampleFormat::Float,
            WavEncoding::Pcm16 => SampleFormat::Int,
        },
    };
    let mut writer = WavWriter::create(path, spec)?;
    let mut clipped = 0;
    for s in &w.samples {
        let v = s.as_f64();
        let c = v.clamp(-1.0, 1.0);
        if c != v {
            clipped += 1;
        }
        match encoding {
            WavEncoding::Float32 => writer.write_sample(c as f32)?,
            WavEncoding::Pcm16 => writer.write_sample((c * 32767.0).round() as i16)?,
        }
    }
    writer.finalize()?;
    if clipped > 0 {
        log::warn!("{}: clamped {clipped} samples to ±1.0", path.display());
    }
    Ok(clipped)
}
