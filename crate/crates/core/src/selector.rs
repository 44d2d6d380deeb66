//! Per-frame model selection by minimum predictive uncertainty across a
//! bank of noise-specific models.

use crate::dsp::{MagnitudeSpectrogram, Stft, StftConfig, Waveform};
use crate::error::{Error, Result};
use crate::mc::{mc_forward, model_stream_seed, McConfig, McEstimate};
use crate::nn::MlpModel;
use crate::scalar::Scalar;

/// How mask streams are assigned to the models of a bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeedPolicy {
    /// Model `i` draws from the stream keyed by `(seed, i)`; adding a model
    /// never perturbs the others.
    #[default]
    Independent,
    /// Every model reuses model 0's stream (common random numbers).
    Shared,
}

impl SeedPolicy {
    fn stream_index(self, model_index: usize) -> usize {
        match self {
            SeedPolicy::Independent => model_index,
            SeedPolicy::Shared => 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelBank<T> {
    models: Vec<(String, MlpModel<T>)>,
}

impl<T: Scalar> ModelBank<T> {
    /// All models must share one architecture.
    pub fn new(models: Vec<(String, MlpModel<T>)>) -> Result<Self> {
        let Some((_, first)) = models.first() else {
            return Err(Error::EmptyBank);
        };
        let arch = first.arch();
        for (id, m) in &models[1..] {
            if m.arch() != arch {
                return Err(Error::InvalidConfig(format!(
                    "model '{id}' has architecture {:?}, bank uses {arch:?}",
                    m.arch()
                )));
            }
        }
        Ok(Self { models })
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.models.iter().map(|(id, _)| id.as_str())
    }

    pub fn model(&self, i: usize) -> &MlpModel<T> {
        &self.models[i].1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSelection<T> {
    pub frame_index: usize,
    pub chosen: usize,
    pub chosen_model_id: String,
    pub var_traces: Vec<T>,
    pub chosen_mean: Vec<T>,
}

/// Index of the smallest value, lowest index on ties. NaN never wins.
pub fn argmin_first<T: Scalar>(values: &[T]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some(b) if values[b] <= *v => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Picks the minimum-trace estimate; its mean becomes the frame estimate.
pub fn choose<T: Scalar>(
    bank: &ModelBank<T>,
    frame_index: usize,
    estimates: Vec<McEstimate<T>>,
) -> Result<FrameSelection<T>> {
    if estimates.len() != bank.len() {
        return Err(Error::DimensionMismatch {
            what: "estimates per bank",
            expected: bank.len(),
            got: estimates.len(),
        });
    }
    let var_traces: Vec<T> = estimates.iter().map(|e| e.var_trace).collect();
    let chosen = argmin_first(&var_traces).ok_or(Error::NonFinite("variance traces"))?;
    let chosen_mean = estimates.into_iter().nth(chosen).map(|e| e.mean).unwrap_or_default();
    Ok(FrameSelection {
        frame_index,
        chosen,
        chosen_model_id: bank.models[chosen].0.clone(),
        var_traces,
        chosen_mean,
    })
}

/// Runs every model of the bank on one frame and keeps the least uncertain.
/// The same `T` outputs feed both the variance and the returned mean.
pub fn select_frame<T: Scalar>(
    bank: &ModelBank<T>,
    x: &[T],
    mc_cfg: &McConfig,
    frame_index: usize,
    policy: SeedPolicy,
) -> Result<FrameSelection<T>> {
    let estimates = bank
        .models
        .iter()
        .enumerate()
        .map(|(i, (_, m))| {
            let cfg = McConfig {
                seed: model_stream_seed(mc_cfg.seed, policy.stream_index(i)),
                ..*mc_cfg
            };
            mc_forward(m, x, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    choose(bank, frame_index, estimates)
}

#[derive(Debug, Clone)]
pub struct MultiEnhanced<T> {
    pub waveform: Waveform<T>,
    pub estimate: MagnitudeSpectrogram<T>,
    pub selections: Vec<FrameSelection<T>>,
}

/// Per-frame selection over the whole utterance, resynthesized with the
/// noisy phase. With one model this reproduces single-model enhancement.
pub fn enhance_multi<T: Scalar>(
    bank: &ModelBank<T>,
    noisy: &Waveform<T>,
    stft_cfg: &StftConfig,
    mc_cfg: &McConfig,
    policy: SeedPolicy,
) -> Result<MultiEnhanced<T>> {
    use rayon::prelude::*;
    mc_cfg.validate()?;
    let stft = Stft::new(*stft_cfg)?;
    let (mag, phase) = stft.analyze(noisy)?;
    let selections = (0..mag.n_frames())
        .into_par_iter()
        .map(|f| select_frame(bank, mag.frame(f), mc_cfg, f, policy))
        .collect::<Result<Vec<_>>>()?;
    let frames: Vec<Vec<T>> = selections.iter().map(|s| s.chosen_mean.clone()).collect();
    let estimate = MagnitudeSpectrogram::from_frames(&frames, mag.n_bins())?;
    let waveform = stft.synthesize(&estimate, &phase, noisy.len())?;
    Ok(MultiEnhanced {
        waveform,
        estimate,
        selections,
    })
}

/// Selection log: a header line then one `frame_idx,chosen_model_id,var_0,…`
/// row per frame.
pub fn selection_log<T: Scalar>(bank: &ModelBank<T>, selections: &[FrameSelection<T>]) -> String {
    let mut out = String::from("frame_idx,chosen_model_id");
    for i in 0..bank.len() {
        out.push_str(&format!(",var_{i}"));
    }
    out.push('\n');
    for s in selections {
        out.push_str(&format!("{},{}", s.frame_index, s.chosen_model_id));
        for v in &s.var_traces {
            out.push_str(&format!(",{:e}", v.as_f64()));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::enhance_waveform;

    fn est(trace: f64) -> McEstimate<f64> {
        McEstimate {
            mean: vec![trace],
            per_bin_var: vec![trace],
            var_trace: trace,
        }
    }

    fn bank(m: usize) -> ModelBank<f64> {
        ModelBank::new(
            (0..m)
                .map(|i| (format!("m{i}"), MlpModel::new(&[257, 16, 257], 0.2, i as u64).unwrap()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn picks_argmin() {
        let s = choose(&bank(3), 0, vec![est(3.0), est(1.0), est(2.0)]).unwrap();
        assert_eq!(s.chosen, 1);
        assert_eq!(s.chosen_model_id, "m1");
        assert_eq!(s.chosen_mean, vec![1.0]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let s = choose(&bank(3), 0, vec![est(1.0), est(1.0), est(2.0)]).unwrap();
        assert_eq!(s.chosen, 0);
        assert_eq!(argmin_first(&[f64::NAN, 2.0, 2.0]), Some(1));
        assert_eq!(argmin_first::<f64>(&[]), None);
    }

    #[test]
    fn empty_and_mismatched_banks_rejected() {
        assert!(matches!(ModelBank::<f64>::new(vec![]), Err(Error::EmptyBank)));
        let a = MlpModel::<f64>::new(&[257, 16, 257], 0.2, 0).unwrap();
        let b = MlpModel::<f64>::new(&[257, 8, 257], 0.2, 0).unwrap();
        assert!(ModelBank::new(vec![("a".into(), a), ("b".into(), b)]).is_err());
    }

    #[test]
    fn single_model_bank_matches_single_enhancement() {
        let b = bank(1);
        let noisy = Waveform::new((0..3000).map(|i| ((i as f64) * 0.05).sin() * 0.3).collect(), 16_000).unwrap();
        let cfg = McConfig {
            t_passes: 5,
            seed: 9,
            tau_inv: 0.0,
        };
        let multi = enhance_multi(&b, &noisy, &StftConfig::default(), &cfg, SeedPolicy::Independent).unwrap();
        let single = enhance_waveform(b.model(0), &noisy, &StftConfig::default(), &cfg).unwrap();
        assert_eq!(multi.waveform, single.waveform);
        assert_eq!(multi.selections.len(), single.var_traces.len());
        for (s, v) in multi.selections.iter().zip(&single.var_traces) {
            assert_eq!(s.var_traces[0], *v);
        }
    }

    #[test]
    fn identical_models_with_shared_streams_tie_to_model_zero() {
        let m = MlpModel::<f64>::new(&[257, 16, 257], 0.2, 0).unwrap();
        let b = ModelBank::new(vec![
            ("a".into(), m.clone()),
            ("b".into(), m.clone()),
            ("c".into(), m.clone()),
        ])
        .unwrap();
        let noisy = Waveform::new((0..2000).map(|i| ((i as f64) * 0.11).cos() * 0.2).collect(), 16_000).unwrap();
        let cfg = McConfig {
            t_passes: 4,
            seed: 1,
            tau_inv: 0.0,
        };
        let multi = enhance_multi(&b, &noisy, &StftConfig::default(), &cfg, SeedPolicy::Shared).unwrap();
        let single = enhance_waveform(&m, &noisy, &StftConfig::default(), &cfg).unwrap();
        assert!(multi.selections.iter().all(|s| s.chosen == 0));
        assert_eq!(multi.waveform, single.waveform);
    }

    #[test]
    fn log_format() {
        let b = bank(2);
        let s = choose(&b, 4, vec![est(2.0), est(0.5)]).unwrap();
        let log = selection_log(&b, &[s]);
        assert_eq!(log, "frame_idx,chosen_model_id,var_0,var_1\n4,m1,2e0,5e-1\n");
    }
}
