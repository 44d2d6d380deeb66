use super::backprop::Gradients;
use super::model::MlpModel;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd,
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates, zero at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn for_model(model: &MlpModel<T>) -> Self {
        let zeros: Vec<Vec<T>> = model.param_slices().map(|s| vec![T::zero(); s.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn for_shapes(lens: &[usize]) -> Self {
        let zeros: Vec<Vec<T>> = lens.iter().map(|&n| vec![T::zero(); n]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

/// Bias-corrected Adam update of one buffer at step `t` (1-based).
/// `weight_decay` adds `λθ` to the gradient.
#[allow(clippy::too_many_arguments)]
pub fn adam_update<T: Scalar>(
    params: &mut [T],
    grads: &[T],
    m: &mut [T],
    v: &mut [T],
    t: u64,
    lr: f64,
    (beta1, beta2, eps): (f64, f64, f64),
    weight_decay: f64,
) {
    let c1 = 1.0 - beta1.powi(t as i32);
    let c2 = 1.0 - beta2.powi(t as i32);
    let (b1, b2) = (T::of(beta1), T::of(beta2));
    let (nb1, nb2) = (T::of(1.0 - beta1), T::of(1.0 - beta2));
    let step = T::of(lr / c1);
    let inv_c2 = T::of(1.0 / c2);
    let eps = T::of(eps);
    let wd = T::of(weight_decay);
    for i in 0..params.len() {
        let g = if weight_decay != 0.0 {
            grads[i] + wd * params[i]
        } else {
            grads[i]
        };
        m[i] = b1 * m[i] + nb1 * g;
        v[i] = b2 * v[i] + nb2 * g * g;
        params[i] -= step * m[i] / ((v[i] * inv_c2).sqrt() + eps);
    }
}

impl<T: Scalar> MlpModel<T> {
    /// Applies one optimizer step with `grads`.
    pub fn apply_gradients(
        &mut self,
        grads: &Gradients<T>,
        state: &mut AdamState<T>,
        kind: OptimizerKind,
        lr: f64,
        weight_decay: f64,
    ) {
        state.t += 1;
        let t = state.t;
        let params: Vec<&mut [T]> = self.param_slices_mut().collect();
        for (((p, g), m), v) in params
            .into_iter()
            .zip(grads.slices())
            .zip(state.m.iter_mut())
            .zip(state.v.iter_mut())
        {
            match kind {
                OptimizerKind::Adam { beta1, beta2, eps } => {
                    adam_update(p, g, m, v, t, lr, (beta1, beta2, eps), weight_decay)
                }
                OptimizerKind::Sgd => {
                    let (lr, wd) = (T::of(lr), T::of(weight_decay));
                    for (pi, &gi) in p.iter_mut().zip(g) {
                        *pi -= lr * (gi + wd * *pi);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEFAULT: (f64, f64, f64) = (0.9, 0.999, 1e-8);

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = [0.5f64];
        let (mut m, mut v) = ([0.0], [0.0]);
        adam_update(&mut p, &[1.0], &mut m, &mut v, 1, 1e-3, DEFAULT, 0.0);
        // m̂ = v̂ = 1, so the step is lr / (1 + eps)
        assert!((0.5 - p[0] - 1e-3).abs() < 1e-3 * 1e-7);
        let mut p = [0.5f64];
        let (mut m, mut v) = ([0.0], [0.0]);
        adam_update(&mut p, &[1.0], &mut m, &mut v, 1, 1e-3, (0.9, 0.999, 0.0), 0.0);
        assert!((0.5 - p[0] - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut p = [0.25f64, -1.0];
        let (mut m, mut v) = ([0.0; 2], [0.0; 2]);
        for t in 1..=50 {
            adam_update(&mut p, &[0.0, 0.0], &mut m, &mut v, t, 0.1, DEFAULT, 0.0);
        }
        assert_eq!(p, [0.25, -1.0]);
    }

    /// Independent scalar simulation of Adam on f(θ) = θ².
    fn simulate_quadratic(steps: u64, lr: f64) -> f64 {
        let (b1, b2, eps) = DEFAULT;
        let (mut th, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        for t in 1..=steps {
            let g = 2.0 * th;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t as i32));
            let vh = v / (1.0 - b2.powi(t as i32));
            th -= lr * mh / (vh.sqrt() + eps);
        }
        th
    }

    #[test]
    fn quadratic_converges() {
        let mut p = [1.0f64];
        let (mut m, mut v) = ([0.0], [0.0]);
        for t in 1..=100 {
            let g = [2.0 * p[0]];
            adam_update(&mut p, &g, &mut m, &mut v, t, 0.1, DEFAULT, 0.0);
        }
        let oracle = simulate_quadratic(100, 0.1);
        assert!((p[0] - oracle).abs() < 1e-12, "{} vs {oracle}", p[0]);
        assert!(p[0].abs() < 0.01, "{}", p[0]);
    }

    #[test]
    fn weight_decay_shrinks_with_zero_gradient() {
        let mut p = [1.0f64];
        let (mut m, mut v) = ([0.0], [0.0]);
        adam_update(&mut p, &[0.0], &mut m, &mut v, 1, 0.01, DEFAULT, 0.1);
        assert!(p[0] < 1.0);
    }
}
