use rand::Rng;

use super::dropout::DropoutMask;
use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};
use crate::seed;

/// 257 → 3 × 2048 → 257.
pub const PAPER_ARCH: [usize; 5] = [257, 2048, 2048, 2048, 257];

/// Nonlinearity applied after every layer, output included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Relu,
    /// Linear network; only used for analysis and tests.
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => z.max(T::zero()),
            Activation::Identity => z,
        }
    }

    #[inline]
    pub fn derivative<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Identity => T::one(),
        }
    }
}

/// Dense layer, weights row-major `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Layer<T> {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![T::zero(); in_dim * out_dim],
            bias: vec![T::zero(); out_dim],
        }
    }

    #[inline]
    pub fn row(&self, o: usize) -> &[T] {
        &self.weights[o * self.in_dim..(o + 1) * self.in_dim]
    }

    /// `out = W·x + b`
    pub fn affine(&self, x: &[T], out: &mut [T]) {
        for (o, y) in out.iter_mut().enumerate() {
            *y = dot(self.row(o), x) + self.bias[o];
        }
    }
}

/// Training bookkeeping carried in memory (not part of the model file).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub loss_log: Vec<f64>,
}

/// Multilayer perceptron with dropout on every hidden layer's activations.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<T> {
    pub layers: Vec<Layer<T>>,
    pub activation: Activation,
    /// Probability of dropping a hidden unit, in `[0, 1)`.
    pub dropout_rate: f64,
    pub meta: TrainingMeta,
}

/// Per-sample forward buffers: pre-activations and (post-dropout)
/// activations of every layer.
#[derive(Debug, Clone)]
pub struct Workspace<T> {
    pub(crate) pre: Vec<Vec<T>>,
    pub(crate) act: Vec<Vec<T>>,
}

impl<T: Scalar> Workspace<T> {
    pub fn output(&self) -> &[T] {
        self.act.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl<T: Scalar> MlpModel<T> {
    /// He-uniform initialized model: weights `U(±sqrt(6/fan_in))`, zero biases.
    pub fn new(arch: &[usize], dropout_rate: f64, seed: u64) -> Result<Self> {
        validate_arch(arch)?;
        validate_dropout(dropout_rate)?;
        let mut rng = seed::stream_rng(seed, 0x696e_6974);
        let layers = arch
            .windows(2)
            .map(|d| {
                let bound = (6.0 / d[0] as f64).sqrt();
                let mut l = Layer::zeros(d[0], d[1]);
                for w in &mut l.weights {
                    *w = T::of(rng.random_range(-bound..bound));
                }
                l
            })
            .collect();
        Ok(Self {
            layers,
            activation: Activation::Relu,
            dropout_rate,
            meta: TrainingMeta::default(),
        })
    }

    pub fn from_layers(layers: Vec<Layer<T>>, activation: Activation, dropout_rate: f64) -> Result<Self> {
        validate_dropout(dropout_rate)?;
        if layers.is_empty() {
            return Err(Error::InvalidConfig("model needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.in_dim * l.out_dim || l.bias.len() != l.out_dim {
                return Err(Error::InvalidConfig(format!(
                    "layer {i} buffers do not match its shape"
                )));
            }
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].out_dim != w[1].in_dim {
                return Err(Error::DimensionMismatch {
                    what: if i == 0 { "layer chain" } else { "hidden layer chain" },
                    expected: w[0].out_dim,
                    got: w[1].in_dim,
                });
            }
        }
        Ok(Self {
            layers,
            activation,
            dropout_rate,
            meta: TrainingMeta::default(),
        })
    }

    pub fn arch(&self) -> Vec<usize> {
        let mut a = vec![self.layers[0].in_dim];
        a.extend(self.layers.iter().map(|l| l.out_dim));
        a
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim).unwrap_or(0)
    }

    /// Widths of the layers that carry dropout.
    pub fn hidden_dims(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(|l| l.out_dim).collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    pub fn workspace(&self) -> Workspace<T> {
        Workspace {
            pre: self.layers.iter().map(|l| vec![T::zero(); l.out_dim]).collect(),
            act: self.layers.iter().map(|l| vec![T::zero(); l.out_dim]).collect(),
        }
    }

    /// Single forward pass. `None` disables dropout; with a mask, dropped
    /// hidden units output zero and kept ones are scaled by `1/(1-p)`.
    pub fn forward(&self, x: &[T], mask: Option<&DropoutMask>) -> Result<Vec<T>> {
        let mut ws = self.workspace();
        self.forward_into(x, mask, &mut ws)?;
        Ok(ws.output().to_vec())
    }

    /// Forward pass keeping every intermediate in `ws` (needed by backprop).
    pub fn forward_into(&self, x: &[T], mask: Option<&DropoutMask>, ws: &mut Workspace<T>) -> Result<()> {
        self.check_input(x)?;
        self.check_mask(mask)?;
        self.layers[0].affine(x, &mut ws.pre[0]);
        self.propagate(mask, ws);
        Ok(())
    }

    /// First-layer pre-activation; identical across dropout passes for a
    /// fixed input since the input itself is never dropped.
    pub(crate) fn first_preactivation(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_input(x)?;
        let mut z = vec![T::zero(); self.layers[0].out_dim];
        self.layers[0].affine(x, &mut z);
        Ok(z)
    }

    /// Completes a forward pass from a precomputed first-layer pre-activation.
    pub(crate) fn forward_from_preactivation(
        &self,
        z0: &[T],
        mask: Option<&DropoutMask>,
        ws: &mut Workspace<T>,
    ) -> Result<()> {
        self.check_mask(mask)?;
        ws.pre[0].copy_from_slice(z0);
        self.propagate(mask, ws);
        Ok(())
    }

    fn propagate(&self, mask: Option<&DropoutMask>, ws: &mut Workspace<T>) {
        let last = self.layers.len() - 1;
        let scale = mask.map(|m| T::of(m.scale()));
        for l in 0..=last {
            if l > 0 {
                self.layers[l].affine(&ws.act[l - 1], &mut ws.pre[l]);
            }
            let act = self.activation;
            let (pre, out) = (&ws.pre[l], &mut ws.act[l]);
            match (mask, l < last) {
                (Some(m), true) => {
                    let keep = m.layer(l);
                    let s = scale.unwrap_or_else(T::one);
                    for ((a, &z), &k) in out.iter_mut().zip(pre).zip(keep) {
                        *a = if k { act.apply(z) * s } else { T::zero() };
                    }
                }
                _ => {
                    for (a, &z) in out.iter_mut().zip(pre) {
                        *a = act.apply(z);
                    }
                }
            }
        }
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "model input",
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn check_mask(&self, mask: Option<&DropoutMask>) -> Result<()> {
        if let Some(m) = mask {
            let hidden = self.hidden_dims();
            if m.n_layers() != hidden.len() {
                return Err(Error::DimensionMismatch {
                    what: "dropout mask layers",
                    expected: hidden.len(),
                    got: m.n_layers(),
                });
            }
            for (l, &h) in hidden.iter().enumerate() {
                if m.layer(l).len() != h {
                    return Err(Error::DimensionMismatch {
                        what: "dropout mask width",
                        expected: h,
                        got: m.layer(l).len(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Same architecture and parameters in another precision.
    pub fn cast<U: Scalar>(&self) -> MlpModel<U> {
        MlpModel {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    in_dim: l.in_dim,
                    out_dim: l.out_dim,
                    weights: l.weights.iter().map(|w| U::of(w.as_f64())).collect(),
                    bias: l.bias.iter().map(|b| U::of(b.as_f64())).collect(),
                })
                .collect(),
            activation: self.activation,
            dropout_rate: self.dropout_rate,
            meta: self.meta.clone(),
        }
    }

    /// Iterates weight and bias buffers in file order.
    pub fn param_slices(&self) -> impl Iterator<Item = &[T]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
    }

    pub fn param_slices_mut(&mut self) -> impl Iterator<Item = &mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
    }
}

pub(crate) fn validate_arch(arch: &[usize]) -> Result<()> {
    if arch.len() < 2 || arch.contains(&0) {
        return Err(Error::InvalidConfig(format!("invalid architecture {arch:?}")));
    }
    Ok(())
}

pub(crate) fn validate_dropout(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidConfig(format!("dropout rate {p} outside [0, 1)")));
    }
    Ok(())
}
