use rand::seq::SliceRandom;

use super::backprop::batch_gradients;
use super::dropout::DropoutMask;
use super::model::{validate_dropout, MlpModel};
use super::optim::{AdamState, OptimizerKind};
use crate::dsp::{Stft, StftConfig, Waveform};
use crate::error::{Error, Result};
use crate::mixer::{render_jobs, DatasetManifest};
use crate::scalar::Scalar;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    /// L2 weight decay λ; zero means no decay term.
    pub weight_decay: f64,
    pub seed: u64,
    pub dropout_rate: f64,
    /// Hidden layer widths; input and output widths come from the STFT.
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 128,
            epochs: 20,
            optimizer: OptimizerKind::default(),
            weight_decay: 0.0,
            seed: 0,
            dropout_rate: 0.2,
            hidden: vec![2048; 3],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be finite and >= 0", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return bad(format!("weight decay {} must be >= 0", self.weight_decay));
        }
        if self.hidden.contains(&0) {
            return bad(format!("hidden widths {:?} must be positive", self.hidden));
        }
        if let OptimizerKind::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps.is_nan() || eps <= 0.0 {
                return bad(format!("bad Adam parameters ({beta1}, {beta2}, {eps})"));
            }
        }
        validate_dropout(self.dropout_rate)
    }

    pub fn arch(&self, n_bins: usize) -> Vec<usize> {
        let mut a = vec![n_bins];
        a.extend(&self.hidden);
        a.push(n_bins);
        a
    }
}

/// Aligned (noisy input, clean target) magnitude frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet<T> {
    pub n_bins: usize,
    inputs: Vec<T>,
    targets: Vec<T>,
}

impl<T: Scalar> FrameSet<T> {
    pub fn new(n_bins: usize) -> Self {
        Self {
            n_bins,
            inputs: Vec::new(),
            targets: Vec::new(),
        }
    }

    pub fn push(&mut self, input: &[T], target: &[T]) -> Result<()> {
        for (what, v) in [("input frame", input), ("target frame", target)] {
            if v.len() != self.n_bins {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: self.n_bins,
                    got: v.len(),
                });
            }
        }
        self.inputs.extend_from_slice(input);
        self.targets.extend_from_slice(target);
        Ok(())
    }

    pub fn extend(&mut self, other: &FrameSet<T>) {
        self.inputs.extend_from_slice(&other.inputs);
        self.targets.extend_from_slice(&other.targets);
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.n_bins.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input(&self, i: usize) -> &[T] {
        &self.inputs[i * self.n_bins..(i + 1) * self.n_bins]
    }

    pub fn target(&self, i: usize) -> &[T] {
        &self.targets[i * self.n_bins..(i + 1) * self.n_bins]
    }
}

/// Pairs each noisy STFT magnitude frame with the clean frame at the same
/// position.
pub fn frame_pairs<T: Scalar>(clean: &Waveform<T>, noisy: &Waveform<T>, stft: &Stft<T>) -> Result<FrameSet<T>> {
    if clean.len() != noisy.len() {
        return Err(Error::DimensionMismatch {
            what: "clean/noisy length",
            expected: clean.len(),
            got: noisy.len(),
        });
    }
    let (cm, _) = stft.analyze(clean)?;
    let (nm, _) = stft.analyze(noisy)?;
    let mut set = FrameSet::new(stft.config().n_bins);
    for (x, y) in nm.frames().zip(cm.frames()) {
        set.push(x, y)?;
    }
    Ok(set)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Mean per-sample training loss (dropout active) of each epoch.
    pub epoch_loss: Vec<f64>,
}

const SHUFFLE_STREAM: u64 = 0;

/// Mini-batch training with a seeded per-epoch shuffle and an independent
/// dropout mask per sample.
pub fn fit<T: Scalar>(model: &mut MlpModel<T>, data: &FrameSet<T>, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if data.n_bins != model.input_dim() || data.n_bins != model.output_dim() {
        return Err(Error::DimensionMismatch {
            what: "frame width vs model",
            expected: model.input_dim(),
            got: data.n_bins,
        });
    }
    if cfg.learning_rate == 0.0 {
        log::warn!("learning rate is 0: parameters will not change");
    }
    let hidden = model.hidden_dims();
    let p = model.dropout_rate;
    let mut state = AdamState::for_model(model);
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.epochs {
        let epoch_seed = seed::derive(cfg.seed, epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut seed::stream_rng(epoch_seed, SHUFFLE_STREAM));
        let mut total = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let inputs: Vec<&[T]> = batch.iter().map(|&i| data.input(i)).collect();
            let targets: Vec<&[T]> = batch.iter().map(|&i| data.target(i)).collect();
            let masks: Vec<Option<DropoutMask>> = (0..batch.len())
                .map(|j| {
                    (p > 0.0).then(|| {
                        let pos = (b * cfg.batch_size + j) as u64;
                        DropoutMask::sample(&hidden, p, &mut seed::stream_rng(epoch_seed, pos + 1))
                    })
                })
                .collect();
            let (grads, loss) = batch_gradients(model, &inputs, &targets, &masks)?;
            total += loss.as_f64() * batch.len() as f64;
            model.apply_gradients(&grads, &mut state, cfg.optimizer, cfg.learning_rate, cfg.weight_decay);
        }
        let mean = total / data.len() as f64;
        log::info!("epoch {}/{}: loss {mean:.6}", epoch + 1, cfg.epochs);
        report.epoch_loss.push(mean);
    }
    if !model.is_finite() {
        return Err(Error::NonFinite("trained parameters"));
    }
    model.meta.epochs += cfg.epochs;
    model.meta.loss_log.extend(&report.epoch_loss);
    Ok(report)
}

/// Builds the training set from `manifest` (mixing on the fly) and trains a
/// freshly initialized model.
pub fn train<T: Scalar>(manifest: &DatasetManifest, stft_cfg: &StftConfig, cfg: &TrainConfig) -> Result<MlpModel<T>> {
    cfg.validate()?;
    if manifest.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let stft = Stft::new(*stft_cfg)?;
    let mut data = FrameSet::new(stft_cfg.n_bins);
    for mix in render_jobs::<T>(manifest, cfg.seed)? {
        data.extend(&frame_pairs(&mix.clean, &mix.noisy, &stft)?);
    }
    let mut model = MlpModel::new(
        &cfg.arch(stft_cfg.n_bins),
        cfg.dropout_rate,
        seed::derive(cfg.seed, u64::MAX),
    )?;
    fit(&mut model, &data, cfg)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// 200 frames of a noisy→clean toy mapping in 16 bins.
    fn toy_set() -> FrameSet<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut set = FrameSet::new(16);
        for _ in 0..200 {
            let clean: Vec<f32> = (0..16)
                .map(|k| if k % 4 == 0 { rng.random_range(2.0..6.0) } else { 0.2 })
                .collect();
            let noisy: Vec<f32> = clean.iter().map(|c| c + rng.random_range(0.0..1.5)).collect();
            set.push(&noisy, &clean).unwrap();
        }
        set
    }

    fn toy_cfg() -> TrainConfig {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 16,
            epochs: 20,
            hidden: vec![32, 32],
            seed: 4,
            ..Default::default()
        }
    }

    #[test]
    fn loss_halves_over_twenty_epochs() {
        let data = toy_set();
        let cfg = toy_cfg();
        let mut m = MlpModel::<f32>::new(&cfg.arch(16), 0.2, 7).unwrap();
        let r = fit(&mut m, &data, &cfg).unwrap();
        assert_eq!(r.epoch_loss.len(), 20);
        assert!(r.epoch_loss[19] <= 0.5 * r.epoch_loss[0], "{:?}", r.epoch_loss);
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let data = toy_set();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            ..toy_cfg()
        };
        let mut m = MlpModel::<f64>::new(&cfg.arch(16), 0.0, 7).unwrap();
        let data = FrameSet {
            n_bins: 16,
            inputs: data.inputs.iter().map(|&v| v as f64).collect(),
            targets: data.targets.iter().map(|&v| v as f64).collect(),
        };
        let before = m.clone();
        let r = fit(&mut m, &data, &cfg).unwrap();
        assert_eq!(m.layers, before.layers);
        for l in &r.epoch_loss {
            assert!((l - r.epoch_loss[0]).abs() <= 1e-12 * r.epoch_loss[0]);
        }
    }

    #[test]
    fn same_seed_same_model() {
        let data = toy_set();
        let cfg = TrainConfig { epochs: 3, ..toy_cfg() };
        let run = || {
            let mut m = MlpModel::<f32>::new(&cfg.arch(16), 0.2, 7).unwrap();
            fit(&mut m, &data, &cfg).unwrap();
            m
        };
        assert_eq!(run().layers, run().layers);
    }

    #[test]
    fn empty_set_is_an_error() {
        let cfg = toy_cfg();
        let mut m = MlpModel::<f32>::new(&cfg.arch(16), 0.2, 7).unwrap();
        assert!(matches!(
            fit(&mut m, &FrameSet::new(16), &cfg),
            Err(Error::EmptyTrainingSet)
        ));
        assert!(matches!(
            train::<f32>(&DatasetManifest::default(), &StftConfig::default(), &cfg),
            Err(Error::EmptyTrainingSet)
        ));
    }

    #[test]
    fn default_config() {
        let c = TrainConfig::default();
        assert_eq!(c.learning_rate, 1e-4);
        assert_eq!(c.batch_size, 128);
        assert_eq!(c.weight_decay, 0.0);
        assert_eq!(c.arch(257), vec![257, 2048, 2048, 2048, 257]);
    }
}
