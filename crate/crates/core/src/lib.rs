//! Magnitude-spectrum MLP speech enhancement with Monte-Carlo dropout.
//!
//! A noisy waveform is framed and transformed ([`dsp`]), each magnitude
//! frame is mapped to a clean estimate by a ReLU network ([`nn`]) run `T`
//! times with dropout active ([`mc`]), and the mean of those passes is
//! resynthesized with the noisy phase. The spread of the passes gives a
//! per-frame uncertainty, which [`selector`] uses to pick among several
//! noise-specific models frame by frame. [`metrics`] scores the result.
//!
//! Every numeric routine is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below name the two concrete instantiations.

pub mod dsp;
pub mod error;
pub mod mc;
pub mod metrics;
pub mod mixer;
pub mod nn;
pub mod scalar;
pub mod seed;
pub mod selector;
pub mod synth;
pub mod wav;

pub use dsp::{istft, stft, MagnitudeSpectrogram, PhaseSpectrogram, Stft, StftConfig, Waveform};
pub use error::{Error, Result};
pub use mc::{enhance, enhance_waveform, mc_forward, Enhanced, Inference, McConfig, McEstimate};
pub use metrics::{correlate, pearson, sse, ssnr, Correlation, EvalReport, FramePoint, SsnrConfig};
pub use mixer::{load_manifest, mix_at_snr, DatasetManifest, MixSpec};
pub use nn::{load_model, msle_loss, save_model, train, DropoutMask, MlpModel, TrainConfig};
pub use scalar::Scalar;
pub use selector::{enhance_multi, select_frame, FrameSelection, ModelBank, SeedPolicy};

pub type Waveform32 = Waveform<f32>;
pub type Waveform64 = Waveform<f64>;
pub type Magnitude32 = MagnitudeSpectrogram<f32>;
pub type Magnitude64 = MagnitudeSpectrogram<f64>;
pub type Mlp32 = MlpModel<f32>;
pub type Mlp64 = MlpModel<f64>;
pub type McEstimate32 = McEstimate<f32>;
pub type McEstimate64 = McEstimate<f64>;
pub type ModelBank32 = ModelBank<f32>;
pub type ModelBank64 = ModelBank<f64>;
