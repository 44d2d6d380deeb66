//! Monte-Carlo dropout inference: `T` stochastic passes per input frame,
//! their empirical mean as the estimate, and the population second moment
//! minus the squared mean (plus `τ⁻¹`) as per-bin predictive variance.
//! The per-frame uncertainty is the trace of that covariance.

use rayon::prelude::*;

use crate::dsp::{MagnitudeSpectrogram, Stft, StftConfig, Waveform};
use crate::error::{Error, Result};
use crate::nn::{DropoutMask, MlpModel};
use crate::scalar::Scalar;
use crate::seed;

/// Clamped negative variances beyond this (relative to the bin's second
/// moment) indicate a numerical fault rather than rounding.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    /// Number of stochastic passes `T`.
    pub t_passes: usize,
    pub seed: u64,
    /// Inverse model precision `τ⁻¹ = 2Nλ / (l²p)`; zero when weight decay is zero.
    pub tau_inv: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            t_passes: 50,
            seed: 0,
            tau_inv: 0.0,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_passes == 0 {
            return Err(Error::ZeroPasses);
        }
        if !(self.tau_inv >= 0.0 && self.tau_inv.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "tau_inv {} must be finite and >= 0",
                self.tau_inv
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate<T> {
    pub mean: Vec<T>,
    pub per_bin_var: Vec<T>,
    /// `Σ per_bin_var`
    pub var_trace: T,
}

/// Raw outputs of the `T` passes, pass `t` using the mask drawn from
/// `(cfg.seed, t)`.
pub fn mc_samples<T: Scalar>(model: &MlpModel<T>, x: &[T], cfg: &McConfig) -> Result<Vec<Vec<T>>> {
    cfg.validate()?;
    let z0 = model.first_preactivation(x)?;
    (0..cfg.t_passes as u64)
        .into_par_iter()
        .map_init(
            || model.workspace(),
            |ws, t| {
                let mask = DropoutMask::for_pass(model, cfg.seed, t);
                model.forward_from_preactivation(&z0, Some(&mask), ws)?;
                Ok(ws.output().to_vec())
            },
        )
        .collect()
}

/// Predictive mean and per-bin variance of a set of stochastic outputs.
///
/// Moments are accumulated in `f64` around the first sample, which is an
/// exact rewrite of `(1/T)Σs² − mean²` that avoids cancellation.
pub fn estimate_from_samples<T: Scalar>(samples: &[Vec<T>], tau_inv: f64) -> Result<McEstimate<T>> {
    let first = samples.first().ok_or(Error::ZeroPasses)?;
    let r = first.len();
    let n = samples.len() as f64;
    let mut sum = vec![0.0f64; r];
    let mut sum_sq = vec![0.0f64; r];
    for s in samples {
        if s.len() != r {
            return Err(Error::DimensionMismatch {
                what: "mc sample width",
                expected: r,
                got: s.len(),
            });
        }
        for k in 0..r {
            let d = s[k].as_f64() - first[k].as_f64();
            sum[k] += d;
            sum_sq[k] += d * d;
        }
    }
    let mut mean = Vec::with_capacity(r);
    let mut per_bin_var = Vec::with_capacity(r);
    for k in 0..r {
        let shift = first[k].as_f64();
        let md = sum[k] / n;
        let mut v = sum_sq[k] / n - md * md + tau_inv;
        if v < 0.0 {
            let second = shift * shift + 2.0 * shift * md + sum_sq[k] / n;
            if -v > CLAMP_TOLERANCE * second.max(1.0) {
                log::warn!("numerical fault: variance {v:e} clamped to 0 in bin {k}");
            }
            v = 0.0;
        }
        mean.push(T::of(shift + md));
        per_bin_var.push(T::of(v));
    }
    let var_trace = per_bin_var.iter().copied().sum();
    Ok(McEstimate {
        mean,
        per_bin_var,
        var_trace,
    })
}

/// `T` dropout passes on one input frame.
pub fn mc_forward<T: Scalar>(model: &MlpModel<T>, x: &[T], cfg: &McConfig) -> Result<McEstimate<T>> {
    estimate_from_samples(&mc_samples(model, x, cfg)?, cfg.tau_inv)
}

/// Mask stream of model `model_index` under `base_seed`.
///
/// Every frame of an utterance reuses the same `T` masks, so pass `t` is one
/// sampled network applied throughout and identical frames get identical
/// estimates.
pub fn model_stream_seed(base_seed: u64, model_index: usize) -> u64 {
    seed::model_seed(base_seed, model_index)
}

/// Per-frame MC estimates for a magnitude spectrogram.
pub fn mc_spectrogram<T: Scalar>(
    model: &MlpModel<T>,
    mag: &MagnitudeSpectrogram<T>,
    cfg: &McConfig,
    model_index: usize,
) -> Result<Vec<McEstimate<T>>> {
    cfg.validate()?;
    let fc = McConfig {
        seed: model_stream_seed(cfg.seed, model_index),
        ..*cfg
    };
    (0..mag.n_frames())
        .into_par_iter()
        .map(|f| mc_forward(model, mag.frame(f), &fc))
        .collect()
}

/// How the network is run at enhancement time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Inference {
    MonteCarlo(McConfig),
    /// Dropout disabled; a single pass and zero uncertainty.
    Deterministic,
}

#[derive(Debug, Clone)]
pub struct Enhanced<T> {
    pub waveform: Waveform<T>,
    pub estimate: MagnitudeSpectrogram<T>,
    /// Per-frame covariance trace (all zero in deterministic mode).
    pub var_traces: Vec<T>,
}

/// Frame-wise enhancement followed by resynthesis with the noisy phase.
/// The output has the same length as `noisy`.
pub fn enhance_waveform<T: Scalar>(
    model: &MlpModel<T>,
    noisy: &Waveform<T>,
    stft_cfg: &StftConfig,
    mc_cfg: &McConfig,
) -> Result<Enhanced<T>> {
    enhance(model, noisy, stft_cfg, Inference::MonteCarlo(*mc_cfg))
}

pub fn enhance<T: Scalar>(
    model: &MlpModel<T>,
    noisy: &Waveform<T>,
    stft_cfg: &StftConfig,
    mode: Inference,
) -> Result<Enhanced<T>> {
    let stft = Stft::new(*stft_cfg)?;
    let (mag, phase) = stft.analyze(noisy)?;
    let (estimate, var_traces) = match mode {
        Inference::MonteCarlo(cfg) => {
            let ests = mc_spectrogram(model, &mag, &cfg, 0)?;
            let traces = ests.iter().map(|e| e.var_trace).collect();
            let frames: Vec<Vec<T>> = ests.into_iter().map(|e| e.mean).collect();
            (MagnitudeSpectrogram::from_frames(&frames, mag.n_bins())?, traces)
        }
        Inference::Deterministic => {
            let frames = (0..mag.n_frames())
                .into_par_iter()
                .map(|f| model.forward(mag.frame(f), None))
                .collect::<Result<Vec<_>>>()?;
            (
                MagnitudeSpectrogram::from_frames(&frames, mag.n_bins())?,
                vec![T::zero(); mag.n_frames()],
            )
        }
    };
    let waveform = stft.synthesize(&estimate, &phase, noisy.len())?;
    Ok(Enhanced {
        waveform,
        estimate,
        var_traces,
    })
}
