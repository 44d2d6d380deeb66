//! Independent reference implementations used by the integration tests.
//! Each one is the textbook formula, written for clarity rather than speed.
#![allow(dead_code)]

use mcdenoise::nn::msle_loss;
use mcdenoise::{DropoutMask, MlpModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.random_range(lo..hi)).collect()
}

/// Periodic Hamming window straight from its definition.
pub fn hamming(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// `O(N²)` DFT of `frame · window`, zero padded to `n_fft`; first `n_bins`
/// bins as (re, im).
pub fn direct_dft(frame: &[f64], n_fft: usize, n_bins: usize) -> Vec<(f64, f64)> {
    let w = hamming(frame.len());
    (0..n_bins)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, (&x, &wi)) in frame.iter().zip(&w).enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * i % n_fft) as f64 / n_fft as f64;
                re += x * wi * ang.cos();
                im += x * wi * ang.sin();
            }
            (re, im)
        })
        .collect()
}

pub fn mean_square(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// First index of the smallest value by exhaustive comparison.
pub fn brute_argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] < v[best] {
            best = i;
        }
    }
    best
}

/// Runs every pass, keeps all outputs, then takes the two-pass mean and
/// population variance.
pub fn store_all_mc(model: &MlpModel<f64>, x: &[f64], seed: u64, t: usize, tau_inv: f64) -> (Vec<f64>, Vec<f64>) {
    let outs: Vec<Vec<f64>> = (0..t as u64)
        .map(|pass| {
            model
                .forward(x, Some(&DropoutMask::for_pass(model, seed, pass)))
                .unwrap()
        })
        .collect();
    let d = outs[0].len();
    let mut mean = vec![0.0; d];
    for o in &outs {
        for (m, v) in mean.iter_mut().zip(o) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= t as f64);
    let mut var = vec![0.0; d];
    for o in &outs {
        for j in 0..d {
            var[j] += (o[j] - mean[j]).powi(2);
        }
    }
    var.iter_mut().for_each(|v| *v = *v / t as f64 + tau_inv);
    (mean, var)
}

/// Central finite difference of the sample MSLE with respect to every
/// parameter, in layer order (weights then bias).
pub fn finite_diff_grad(
    model: &MlpModel<f64>,
    x: &[f64],
    target: &[f64],
    mask: Option<&DropoutMask>,
    h: f64,
) -> Vec<f64> {
    let loss = |m: &MlpModel<f64>| msle_loss(&m.forward(x, mask).unwrap(), target).unwrap();
    let mut out = Vec::new();
    let mut probe = model.clone();
    for l in 0..model.layers.len() {
        for which in 0..2 {
            let n = if which == 0 {
                model.layers[l].weights.len()
            } else {
                model.layers[l].bias.len()
            };
            for i in 0..n {
                let orig = if which == 0 {
                    probe.layers[l].weights[i]
                } else {
                    probe.layers[l].bias[i]
                };
                let set = |m: &mut MlpModel<f64>, v: f64| {
                    if which == 0 {
                        m.layers[l].weights[i] = v
                    } else {
                        m.layers[l].bias[i] = v
                    }
                };
                set(&mut probe, orig + h);
                let up = loss(&probe);
                set(&mut probe, orig - h);
                let down = loss(&probe);
                set(&mut probe, orig);
                out.push((up - down) / (2.0 * h));
            }
        }
    }
    out
}

/// `(nΣxy − ΣxΣy) / sqrt((nΣx² − (Σx)²)(nΣy² − (Σy)²))`
pub fn pearson_textbook(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt()
}

/// Relative difference with a floor on the denominator.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
