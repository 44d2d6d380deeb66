//! Seeded synthetic audio: harmonic speech-like utterances and colored
//! noises, used when no recorded corpus is at hand.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dsp::Waveform;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    White,
    Pink,
    /// Leaky-integrated white noise; energy concentrated at low frequencies.
    Brown,
    /// First difference of white noise; energy rises with frequency.
    Blue,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 4] = [NoiseKind::White, NoiseKind::Pink, NoiseKind::Brown, NoiseKind::Blue];
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::White => "white",
            NoiseKind::Pink => "pink",
            NoiseKind::Brown => "brown",
            NoiseKind::Blue => "blue",
        })
    }
}

impl FromStr for NoiseKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        NoiseKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown noise kind '{s}'")))
    }
}

/// Unit-RMS noise of the requested color.
pub fn noise<T: Scalar>(kind: NoiseKind, len: usize, sample_rate: u32, seed: u64) -> Waveform<T> {
    let mut rng = seed::stream_rng(seed, 0x6e6f_6973);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let white: Vec<f64> = (0..len).map(|_| normal.sample(&mut rng)).collect();
    let mut x: Vec<f64> = match kind {
        NoiseKind::White => white,
        NoiseKind::Pink => {
            // Paul Kellet's economy filter
            let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
            white
                .iter()
                .map(|&w| {
                    b0 = 0.99765 * b0 + w * 0.0990460;
                    b1 = 0.96300 * b1 + w * 0.2965164;
                    b2 = 0.57000 * b2 + w * 1.0526913;
                    b0 + b1 + b2 + w * 0.1848
                })
                .collect()
        }
        NoiseKind::Brown => {
            let mut acc = 0.0;
            white
                .iter()
                .map(|&w| {
                    acc = 0.98 * acc + w;
                    acc
                })
                .collect()
        }
        NoiseKind::Blue => {
            let mut prev = 0.0;
            white
                .iter()
                .map(|&w| {
                    let d = w - prev;
                    prev = w;
                    d
                })
                .collect()
        }
    };
    normalize_rms(&mut x, 1.0);
    Waveform {
        samples: x.into_iter().map(T::of).collect(),
        sample_rate,
    }
}

fn normalize_rms(x: &mut [f64], target: f64) {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v *= target / rms);
    }
}

/// Speech-like utterance: voiced syllables with a gliding pitch and two
/// formant resonances, separated by short pauses. RMS is normalized to
/// `rms`.
pub fn speech_like<T: Scalar>(seconds: f64, sample_rate: u32, rms: f64, seed: u64) -> Waveform<T> {
    let sr = sample_rate as f64;
    let len = (seconds * sr).round() as usize;
    let mut rng = seed::stream_rng(seed, 0x7370_6368);
    let mut x = vec![0.0f64; len];
    let mut pos = (rng.random_range(0.02..0.08) * sr) as usize;
    while pos < len {
        let dur = (rng.random_range(0.08..0.25) * sr) as usize;
        let end = (pos + dur).min(len);
        let f0_start: f64 = rng.random_range(100.0..220.0);
        let f0_end = f0_start * rng.random_range(0.85..1.15);
        let f1: f64 = rng.random_range(300.0..900.0);
        let f2: f64 = rng.random_range(900.0..2500.0);
        let level: f64 = rng.random_range(0.4..1.0);
        let n = (end - pos).max(1) as f64;
        let mut phase = 0.0f64;
        let harmonics = (4000.0 / f0_start.max(f0_end)).floor() as usize;
        let amps: Vec<f64> = (1..=harmonics)
            .map(|h| {
                let f = h as f64 * f0_start;
                let formant = |c: f64, bw: f64| (-((f - c) / bw).powi(2)).exp();
                (0.3 + formant(f1, 150.0) + 0.7 * formant(f2, 250.0)) / (h as f64).sqrt()
            })
            .collect();
        for (i, xi) in x[pos..end].iter_mut().enumerate() {
            let u = i as f64 / n;
            let f0 = f0_start + (f0_end - f0_start) * u;
            phase += 2.0 * PI * f0 / sr;
            let env = (PI * u).sin().powf(0.6);
            let s: f64 = amps
                .iter()
                .enumerate()
                .map(|(h, a)| a * ((h + 1) as f64 * phase).sin())
                .sum();
            *xi = level * env * s;
        }
        pos = end + (rng.random_range(0.03..0.12) * sr) as usize;
    }
    normalize_rms(&mut x, rms);
    Waveform {
        samples: x.into_iter().map(T::of).collect(),
        sample_rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{stft, StftConfig};

    #[test]
    fn deterministic_and_normalized() {
        let a: Waveform<f64> = speech_like(1.0, 16_000, 0.1, 3);
        let b: Waveform<f64> = speech_like(1.0, 16_000, 0.1, 3);
        assert_eq!(a, b);
        assert_eq!(a.len(), 16_000);
        assert!((a.power().sqrt() - 0.1).abs() < 1e-9);
        for k in NoiseKind::ALL {
            let n: Waveform<f64> = noise(k, 4000, 16_000, 1);
            assert!((n.power() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn noise_colors_differ_in_tilt() {
        let cfg = StftConfig::default();
        let tilt = |k| {
            let (m, _) = stft(&noise::<f64>(k, 16_000, 16_000, 2), &cfg).unwrap();
            let (mut lo, mut hi) = (0.0, 0.0);
            for f in m.frames() {
                lo += f[1..64].iter().map(|v| v * v).sum::<f64>();
                hi += f[192..256].iter().map(|v| v * v).sum::<f64>();
            }
            10.0 * (lo / hi).log10()
        };
        assert!(tilt(NoiseKind::Brown) > tilt(NoiseKind::Pink));
        assert!(tilt(NoiseKind::Pink) > tilt(NoiseKind::White));
        assert!(tilt(NoiseKind::White) > tilt(NoiseKind::Blue));
    }

    #[test]
    fn parse_kind() {
        assert_eq!("brown".parse::<NoiseKind>().unwrap(), NoiseKind::Brown);
        assert!("purple".parse::<NoiseKind>().is_err());
    }
}
