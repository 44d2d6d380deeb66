//! Framing, Hamming analysis window, forward/inverse STFT and weighted
//! overlap-add resynthesis using an externally supplied (noisy) phase.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Positions whose squared-window sum falls below this are synthesized as 0.
pub const SYNTHESIS_FLOOR: f64 = 1e-8;

/// Framing parameters. Defaults are 32 ms frames with a 10 ms shift at
/// 16 kHz and a 512-point FFT of which the first 257 bins are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    pub sample_rate: u32,
    pub frame_len: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub n_bins: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            frame_len: 512,
            hop: 160,
            fft_size: 512,
            n_bins: 257,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.frame_len == 0 || self.hop == 0 || self.fft_size == 0 {
            return bad("frame_len, hop and fft_size must be positive".into());
        }
        if self.n_bins != self.fft_size / 2 + 1 {
            return bad(format!(
                "n_bins ({}) must equal fft_size/2 + 1 ({})",
                self.n_bins,
                self.fft_size / 2 + 1
            ));
        }
        if self.hop > self.frame_len {
            return bad(format!("hop ({}) exceeds frame_len ({})", self.hop, self.frame_len));
        }
        if self.frame_len > self.fft_size {
            return bad(format!(
                "frame_len ({}) exceeds fft_size ({})",
                self.frame_len, self.fft_size
            ));
        }
        Ok(())
    }

    /// `floor((len - frame_len) / hop) + 1`, or 0 when shorter than a frame.
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.frame_len {
            0
        } else {
            (len - self.frame_len) / self.hop + 1
        }
    }

    /// Number of samples covered by `n_frames` frames.
    pub fn covered_len(&self, n_frames: usize) -> usize {
        if n_frames == 0 {
            0
        } else {
            (n_frames - 1) * self.hop + self.frame_len
        }
    }
}

/// Mono time-domain signal, nominally full-scale ±1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform<T> {
    pub samples: Vec<T>,
    pub sample_rate: u32,
}

impl<T: Scalar> Waveform<T> {
    /// Validated constructor: non-empty and finite.
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidConfig("empty waveform".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("waveform"));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean-square power.
    pub fn power(&self) -> f64 {
        mean_square(&self.samples)
    }

    pub fn cast<U: Scalar>(&self) -> Waveform<U> {
        Waveform {
            samples: self.samples.iter().map(|s| U::of(s.as_f64())).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

pub(crate) fn mean_square<T: Scalar>(xs: &[T]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().map(|x| x.as_f64() * x.as_f64()).sum::<f64>() / xs.len() as f64
}

macro_rules! frame_matrix {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name<T> {
            n_bins: usize,
            data: Vec<T>,
        }

        impl<T: Scalar> $name<T> {
            pub fn zeros(n_frames: usize, n_bins: usize) -> Self {
                Self {
                    n_bins,
                    data: vec![T::zero(); n_frames * n_bins],
                }
            }

            pub fn from_frames(frames: &[Vec<T>], n_bins: usize) -> Result<Self> {
                let mut data = Vec::with_capacity(frames.len() * n_bins);
                for f in frames {
                    if f.len() != n_bins {
                        return Err(Error::DimensionMismatch {
                            what: "frame bins",
                            expected: n_bins,
                            got: f.len(),
                        });
                    }
                    data.extend_from_slice(f);
                }
                Ok(Self { n_bins, data })
            }

            pub fn n_frames(&self) -> usize {
                if self.n_bins == 0 { 0 } else { self.data.len() / self.n_bins }
            }

            pub fn n_bins(&self) -> usize {
                self.n_bins
            }

            pub fn frame(&self, i: usize) -> &[T] {
                &self.data[i * self.n_bins..(i + 1) * self.n_bins]
            }

            pub fn frame_mut(&mut self, i: usize) -> &mut [T] {
                &mut self.data[i * self.n_bins..(i + 1) * self.n_bins]
            }

            pub fn frames(&self) -> std::slice::ChunksExact<'_, T> {
                self.data.chunks_exact(self.n_bins)
            }

            pub fn as_slice(&self) -> &[T] {
                &self.data
            }
        }
    };
}

frame_matrix!(
    /// Per-frame nonnegative STFT magnitudes, `n_bins` values per frame.
    MagnitudeSpectrogram
);
frame_matrix!(
    /// Per-frame STFT phases in radians, paired with a magnitude spectrogram.
    PhaseSpectrogram
);

/// Periodic Hamming window, `0.54 - 0.46 cos(2πn/N)`.
pub fn hamming<T: Scalar>(len: usize) -> Vec<T> {
    let n = len as f64;
    (0..len)
        .map(|i| T::of(0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / n).cos()))
        .collect()
}

/// Reusable analysis/synthesis engine holding the window and FFT plans.
pub struct Stft<T: Scalar> {
    cfg: StftConfig,
    window: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Scalar> Stft<T> {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            cfg,
            window: hamming(cfg.frame_len),
            forward: planner.plan_fft_forward(cfg.fft_size),
            inverse: planner.plan_fft_inverse(cfg.fft_size),
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    pub fn window(&self) -> &[T] {
        &self.window
    }

    /// Hamming-windowed frames, zero-padded to `fft_size`; only the first
    /// `n_bins` bins are kept. Trailing samples that do not fill a frame are
    /// dropped.
    pub fn analyze(&self, w: &Waveform<T>) -> Result<(MagnitudeSpectrogram<T>, PhaseSpectrogram<T>)> {
        let cfg = &self.cfg;
        if w.len() < cfg.frame_len {
            return Err(Error::InputTooShort {
                len: w.len(),
                frame_len: cfg.frame_len,
            });
        }
        let n_frames = cfg.frame_count(w.len());
        let mut mag = MagnitudeSpectrogram::zeros(n_frames, cfg.n_bins);
        let mut phase = PhaseSpectrogram::zeros(n_frames, cfg.n_bins);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); cfg.fft_size];
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); self.forward.get_inplace_scratch_len()];
        for f in 0..n_frames {
            let start = f * cfg.hop;
            let seg = &w.samples[start..start + cfg.frame_len];
            for (i, c) in buf.iter_mut().enumerate() {
                let re = if i < cfg.frame_len {
                    seg[i] * self.window[i]
                } else {
                    T::zero()
                };
                *c = Complex::new(re, T::zero());
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            let (m, p) = (mag.frame_mut(f), phase.frame_mut(f));
            for k in 0..cfg.n_bins {
                m[k] = buf[k].norm();
                p[k] = buf[k].arg();
            }
        }
        Ok((mag, phase))
    }

    /// Weighted overlap-add resynthesis: each inverse frame is multiplied by
    /// the analysis window and the sum is divided by `Σ w²` per sample.
    pub fn synthesize(
        &self,
        mag: &MagnitudeSpectrogram<T>,
        phase: &PhaseSpectrogram<T>,
        out_len: usize,
    ) -> Result<Waveform<T>> {
        let cfg = &self.cfg;
        let n_frames = mag.n_frames();
        if phase.n_frames() != n_frames {
            return Err(Error::DimensionMismatch {
                what: "phase frame count",
                expected: n_frames,
                got: phase.n_frames(),
            });
        }
        for (what, bins) in [("magnitude bins", mag.n_bins()), ("phase bins", phase.n_bins())] {
            if bins != cfg.n_bins {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: cfg.n_bins,
                    got: bins,
                });
            }
        }
        if n_frames == 0 {
            return Err(Error::InvalidConfig("no frames to synthesize".into()));
        }
        let covered = cfg.covered_len(n_frames);
        if out_len < covered || out_len >= covered + cfg.hop {
            return Err(Error::InvalidConfig(format!(
                "out_len {out_len} inconsistent with {n_frames} frames (expected {covered}..{})",
                covered + cfg.hop
            )));
        }

        let n = cfg.fft_size;
        let scale = T::one() / T::of(n as f64);
        let mut acc = vec![T::zero(); out_len];
        let mut norm = vec![T::zero(); out_len];
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); self.inverse.get_inplace_scratch_len()];
        for f in 0..n_frames {
            let (m, p) = (mag.frame(f), phase.frame(f));
            for k in 0..cfg.n_bins {
                let c = Complex::from_polar(m[k], p[k]);
                buf[k] = c;
                if k > 0 && k < n - k {
                    buf[n - k] = c.conj();
                }
            }
            // DC and Nyquist must be real for a real-valued frame.
            buf[0].im = T::zero();
            if n.is_multiple_of(2) {
                buf[n / 2].im = T::zero();
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            let start = f * cfg.hop;
            for i in 0..cfg.frame_len {
                let w = self.window[i];
                acc[start + i] += buf[i].re * scale * w;
                norm[start + i] += w * w;
            }
        }
        let floor = T::of(SYNTHESIS_FLOOR);
        let samples = acc
            .into_iter()
            .zip(norm)
            .map(|(a, d)| if d < floor { T::zero() } else { a / d })
            .collect();
        Ok(Waveform {
            samples,
            sample_rate: cfg.sample_rate,
        })
    }
}

/// Magnitude and phase of the STFT of `w`.
pub fn stft<T: Scalar>(w: &Waveform<T>, cfg: &StftConfig) -> Result<(MagnitudeSpectrogram<T>, PhaseSpectrogram<T>)> {
    Stft::new(*cfg)?.analyze(w)
}

/// Inverse STFT of `mag` with `phase` via weighted overlap-add.
pub fn istft<T: Scalar>(
    mag: &MagnitudeSpectrogram<T>,
    phase: &PhaseSpectrogram<T>,
    cfg: &StftConfig,
    out_len: usize,
) -> Result<Waveform<T>> {
    Stft::new(*cfg)?.synthesize(mag, phase, out_len)
}

/// Reconstruction SNR in dB of `estimate` against `reference` over `range`.
pub fn reconstruction_snr_db<T: Scalar>(reference: &[T], estimate: &[T], range: std::ops::Range<usize>) -> f64 {
    let (mut sig, mut err) = (0.0, 0.0);
    for i in range {
        let r = reference[i].as_f64();
        let d = r - estimate[i].as_f64();
        sig += r * r;
        err += d * d;
    }
    10.0 * (sig / err).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_wave(len: usize, seed: u64) -> Waveform<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Waveform::new((0..len).map(|_| rng.random_range(-1.0..1.0)).collect(), 16_000).unwrap()
    }

    #[test]
    fn default_config_is_valid() {
        let cfg = StftConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.n_bins, 257);
    }

    #[test]
    fn invalid_configs_rejected() {
        let cfg = StftConfig {
            n_bins: 256,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = StftConfig {
            hop: 600,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = StftConfig {
            frame_len: 1024,
            hop: 160,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn frame_count_for_one_second() {
        let cfg = StftConfig::default();
        let (mag, phase) = stft(&random_wave(16_000, 1), &cfg).unwrap();
        assert_eq!(mag.n_frames(), 97);
        assert_eq!(phase.n_frames(), 97);
        assert_eq!(mag.n_bins(), 257);
    }

    #[test]
    fn too_short_is_an_error() {
        let err = stft(&random_wave(511, 1), &StftConfig::default()).unwrap_err();
        assert!(err.to_string().contains("input too short"));
    }

    #[test]
    fn dc_input_lands_in_bin_zero() {
        let cfg = StftConfig::default();
        let c = 0.25;
        let w = Waveform::new(vec![c; 2000], 16_000).unwrap();
        let (mag, _) = stft(&w, &cfg).unwrap();
        let wsum: f64 = hamming::<f64>(512).iter().sum();
        for f in mag.frames() {
            assert!((f[0] - c * wsum).abs() < 1e-9);
            // the periodic Hamming main lobe puts 0.23·N·c into bin 1
            assert!((f[1] - 0.23 * 512.0 * c).abs() < 1e-9);
            for &v in &f[2..] {
                assert!(v < 1e-9, "leakage {v}");
            }
        }
    }

    #[test]
    fn zero_magnitude_synthesizes_silence() {
        let cfg = StftConfig::default();
        let w = random_wave(3000, 2);
        let (mag, phase) = stft(&w, &cfg).unwrap();
        let zero = MagnitudeSpectrogram::zeros(mag.n_frames(), 257);
        let out = istft(&zero, &phase, &cfg, w.len()).unwrap();
        assert!(out.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn single_frame_restores_original() {
        let cfg = StftConfig {
            hop: 512,
            ..Default::default()
        };
        let w = random_wave(512, 3);
        let (mag, phase) = stft(&w, &cfg).unwrap();
        let out = istft(&mag, &phase, &cfg, 512).unwrap();
        for (a, b) in w.samples.iter().zip(&out.samples) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn frame_count_mismatch_rejected() {
        let cfg = StftConfig::default();
        let w = random_wave(3000, 4);
        let (mag, _) = stft(&w, &cfg).unwrap();
        let phase = PhaseSpectrogram::zeros(mag.n_frames() - 1, 257);
        assert!(istft(&mag, &phase, &cfg, w.len()).is_err());
    }

    #[test]
    fn out_len_must_match_frames() {
        let cfg = StftConfig::default();
        let w = random_wave(3000, 5);
        let (mag, phase) = stft(&w, &cfg).unwrap();
        let covered = cfg.covered_len(mag.n_frames());
        assert!(istft(&mag, &phase, &cfg, covered).is_ok());
        assert!(istft(&mag, &phase, &cfg, covered - 1).is_err());
        assert!(istft(&mag, &phase, &cfg, covered + cfg.hop).is_err());
    }

    #[test]
    fn round_trip_interior_snr() {
        let cfg = StftConfig::default();
        let w = random_wave(4000, 6);
        let (mag, phase) = stft(&w, &cfg).unwrap();
        let out = istft(&mag, &phase, &cfg, w.len()).unwrap();
        let snr = reconstruction_snr_db(&w.samples, &out.samples, 512..w.len() - 512);
        assert!(snr >= 60.0, "{snr}");
    }
}
