use rayon::prelude::*;

use super::dropout::DropoutMask;
use super::loss::msle_grad;
use super::model::{MlpModel, Workspace};
use crate::error::{Error, Result};
use crate::scalar::{axpy, Scalar};

/// Samples per fixed reduction chunk. Partial gradients are summed in chunk
/// order, so results do not depend on the number of worker threads.
const CHUNK: usize = 32;

/// Gradient buffers laid out like the model's `(weights, bias)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(model: &MlpModel<T>) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| (vec![T::zero(); l.weights.len()], vec![T::zero(); l.bias.len()]))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            axpy(T::one(), ow, w);
            axpy(T::one(), ob, b);
        }
    }

    pub fn slices(&self) -> impl Iterator<Item = &[T]> {
        self.layers.iter().flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
    }

    pub fn max_abs(&self) -> T {
        self.slices()
            .flat_map(|s| s.iter())
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

struct Scratch<T> {
    ws: Workspace<T>,
    delta: Vec<Vec<T>>,
    back: Vec<T>,
}

impl<T: Scalar> Scratch<T> {
    fn new(model: &MlpModel<T>) -> Self {
        let widest = model.layers.iter().map(|l| l.in_dim).max().unwrap_or(0);
        Self {
            ws: model.workspace(),
            delta: model.layers.iter().map(|l| vec![T::zero(); l.out_dim]).collect(),
            back: vec![T::zero(); widest],
        }
    }
}

impl<T: Scalar> MlpModel<T> {
    /// Accumulates `weight · ∂loss/∂θ` for one sample into `grads` and
    /// returns the sample's MSLE.
    pub fn backward_sample(
        &self,
        x: &[T],
        target: &[T],
        mask: Option<&DropoutMask>,
        grads: &mut Gradients<T>,
        weight: T,
    ) -> Result<T> {
        let mut scratch = Scratch::new(self);
        self.backward_with(x, target, mask, grads, weight, &mut scratch)
    }

    fn backward_with(
        &self,
        x: &[T],
        target: &[T],
        mask: Option<&DropoutMask>,
        grads: &mut Gradients<T>,
        weight: T,
        s: &mut Scratch<T>,
    ) -> Result<T> {
        if target.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                what: "training target",
                expected: self.output_dim(),
                got: target.len(),
            });
        }
        self.forward_into(x, mask, &mut s.ws)?;
        let last = self.layers.len() - 1;
        let act = self.activation;
        let loss = msle_grad(s.ws.output(), target, &mut s.delta[last])?;
        for (d, &z) in s.delta[last].iter_mut().zip(&s.ws.pre[last]) {
            *d *= weight * act.derivative(z);
        }
        let scale = mask.map(|m| T::of(m.scale()));
        for l in (0..=last).rev() {
            let layer = &self.layers[l];
            let a_prev: &[T] = if l == 0 { x } else { &s.ws.act[l - 1] };
            let (gw, gb) = &mut grads.layers[l];
            let delta = &s.delta[l];
            for (o, &d) in delta.iter().enumerate() {
                if d == T::zero() {
                    continue;
                }
                gb[o] += d;
                axpy(d, a_prev, &mut gw[o * layer.in_dim..(o + 1) * layer.in_dim]);
            }
            if l == 0 {
                break;
            }
            let back = &mut s.back[..layer.in_dim];
            back.fill(T::zero());
            for (o, &d) in delta.iter().enumerate() {
                if d != T::zero() {
                    axpy(d, layer.row(o), back);
                }
            }
            let (lower, _) = s.delta.split_at_mut(l);
            let prev_delta = &mut lower[l - 1];
            let pre = &s.ws.pre[l - 1];
            match (mask, scale) {
                (Some(m), Some(sc)) => {
                    let keep = m.layer(l - 1);
                    for j in 0..prev_delta.len() {
                        prev_delta[j] = if keep[j] {
                            back[j] * sc * act.derivative(pre[j])
                        } else {
                            T::zero()
                        };
                    }
                }
                _ => {
                    for j in 0..prev_delta.len() {
                        prev_delta[j] = back[j] * act.derivative(pre[j]);
                    }
                }
            }
        }
        Ok(loss)
    }
}

/// Gradient of the mean batch MSLE; each sample uses its own mask.
/// Returns the gradients and the mean loss.
pub fn batch_gradients<T: Scalar>(
    model: &MlpModel<T>,
    inputs: &[&[T]],
    targets: &[&[T]],
    masks: &[Option<DropoutMask>],
) -> Result<(Gradients<T>, T)> {
    let n = inputs.len();
    if n == 0 || targets.len() != n || masks.len() != n {
        return Err(Error::InvalidConfig(format!(
            "batch needs matching non-empty inputs/targets/masks ({n}/{}/{})",
            targets.len(),
            masks.len()
        )));
    }
    let weight = T::one() / T::of(n as f64);
    let partials: Vec<Result<(Gradients<T>, T)>> = (0..n)
        .step_by(CHUNK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let end = (start + CHUNK).min(n);
            let mut g = Gradients::zeros_like(model);
            let mut scratch = Scratch::new(model);
            let mut loss = T::zero();
            for i in start..end {
                loss += model.backward_with(inputs[i], targets[i], masks[i].as_ref(), &mut g, weight, &mut scratch)?;
            }
            Ok((g, loss))
        })
        .collect();
    let mut iter = partials.into_iter();
    let (mut total, mut loss) = iter.next().expect("n > 0")?;
    for p in iter {
        let (g, l) = p?;
        total.add_assign(&g);
        loss += l;
    }
    Ok((total, loss * weight))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_loss_gives_zero_gradients() {
        let m = MlpModel::<f64>::new(&[6, 8, 6], 0.0, 1).unwrap();
        let x = vec![0.5, 1.0, 2.0, 0.1, 0.0, 3.0];
        let y = m.forward(&x, None).unwrap();
        let mut g = Gradients::zeros_like(&m);
        let loss = m.backward_sample(&x, &y, None, &mut g, 1.0).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn dropped_unit_has_no_gradient() {
        let mut m = MlpModel::<f64>::new(&[4, 6, 4], 0.5, 2).unwrap();
        // positive biases keep every ReLU active so only the mask zeroes things
        m.layers[0].bias.iter_mut().for_each(|b| *b = 5.0);
        m.layers[1].bias.iter_mut().for_each(|b| *b = 100.0);
        let mut keep = vec![true; 6];
        keep[2] = false;
        let mask = DropoutMask::from_flags(vec![keep], 0.5);
        let x = [1.0, 2.0, 0.5, 0.25];
        let mut g = Gradients::zeros_like(&m);
        m.backward_sample(&x, &[0.0; 4], Some(&mask), &mut g, 1.0).unwrap();
        let (w0, b0) = &g.layers[0];
        assert!(w0[2 * 4..3 * 4].iter().all(|&v| v == 0.0));
        assert_eq!(b0[2], 0.0);
        let (w1, _) = &g.layers[1];
        for o in 0..4 {
            assert_eq!(w1[o * 6 + 2], 0.0);
            assert_ne!(w1[o * 6 + 1], 0.0);
        }
    }

    #[test]
    fn batch_gradient_is_mean_of_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = MlpModel::<f64>::new(&[5, 7, 5], 0.2, 3).unwrap();
        let xs: Vec<Vec<f64>> = (0..70)
            .map(|_| (0..5).map(|_| rng.random_range(0.0..2.0)).collect())
            .collect();
        let ys: Vec<Vec<f64>> = (0..70)
            .map(|_| (0..5).map(|_| rng.random_range(0.0..2.0)).collect())
            .collect();
        let masks: Vec<_> = (0..70).map(|i| Some(DropoutMask::for_pass(&m, 5, i))).collect();
        let xr: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let yr: Vec<&[f64]> = ys.iter().map(Vec::as_slice).collect();
        let (g, loss) = batch_gradients(&m, &xr, &yr, &masks).unwrap();

        let mut expect = Gradients::zeros_like(&m);
        let mut el = 0.0;
        for i in 0..70 {
            el += m
                .backward_sample(&xs[i], &ys[i], masks[i].as_ref(), &mut expect, 1.0 / 70.0)
                .unwrap();
        }
        assert!((loss - el / 70.0).abs() < 1e-12);
        for (a, b) in g.slices().zip(expect.slices()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
