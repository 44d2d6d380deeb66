use rand::Rng;

use super::model::MlpModel;
use crate::scalar::Scalar;
use crate::seed;

/// Per-hidden-layer keep flags. Kept units are scaled by `1/(1-p)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DropoutMask {
    keep: Vec<Vec<bool>>,
    // stored as bits so the mask is Eq
    scale_bits: u64,
}

impl DropoutMask {
    /// Draws each unit independently, kept with probability `1 - p`.
    pub fn sample<R: Rng + ?Sized>(hidden_dims: &[usize], p: f64, rng: &mut R) -> Self {
        let keep_prob = 1.0 - p;
        let keep = hidden_dims
            .iter()
            .map(|&h| (0..h).map(|_| p == 0.0 || rng.random::<f64>() < keep_prob).collect())
            .collect();
        Self {
            keep,
            scale_bits: (1.0 / keep_prob).to_bits(),
        }
    }

    /// Mask for pass `pass` of the stream keyed by `seed`.
    pub fn for_pass<T: Scalar>(model: &MlpModel<T>, seed: u64, pass: u64) -> Self {
        Self::sample(
            &model.hidden_dims(),
            model.dropout_rate,
            &mut seed::stream_rng(seed, pass),
        )
    }

    /// Keeps every unit with unit scale.
    pub fn keep_all(hidden_dims: &[usize]) -> Self {
        Self {
            keep: hidden_dims.iter().map(|&h| vec![true; h]).collect(),
            scale_bits: 1f64.to_bits(),
        }
    }

    pub fn from_flags(keep: Vec<Vec<bool>>, p: f64) -> Self {
        Self {
            keep,
            scale_bits: (1.0 / (1.0 - p)).to_bits(),
        }
    }

    pub fn scale(&self) -> f64 {
        f64::from_bits(self.scale_bits)
    }

    pub fn n_layers(&self) -> usize {
        self.keep.len()
    }

    pub fn layer(&self, l: usize) -> &[bool] {
        &self.keep[l]
    }

    pub fn kept_fraction(&self) -> f64 {
        let total: usize = self.keep.iter().map(Vec::len).sum();
        let kept: usize = self.keep.iter().map(|l| l.iter().filter(|&&k| k).count()).sum();
        kept as f64 / total.max(1) as f64
    }
}
