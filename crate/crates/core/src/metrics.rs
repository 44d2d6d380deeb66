//! Spectral sum squared error, segmental SNR, and the per-frame
//! uncertainty/error correlation study.

use std::fmt;

use crate::dsp::MagnitudeSpectrogram;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn check_shapes<T: Scalar>(a: &MagnitudeSpectrogram<T>, b: &MagnitudeSpectrogram<T>) -> Result<()> {
    if a.n_frames() != b.n_frames() {
        return Err(Error::DimensionMismatch {
            what: "spectrogram frames",
            expected: b.n_frames(),
            got: a.n_frames(),
        });
    }
    if a.n_bins() != b.n_bins() {
        return Err(Error::DimensionMismatch {
            what: "spectrogram bins",
            expected: b.n_bins(),
            got: a.n_bins(),
        });
    }
    Ok(())
}

/// `Σ_bins (Ŝ − S)²` for every frame.
pub fn frame_squared_errors<T: Scalar>(
    estimate: &MagnitudeSpectrogram<T>,
    reference: &MagnitudeSpectrogram<T>,
) -> Result<Vec<f64>> {
    check_shapes(estimate, reference)?;
    Ok(estimate
        .frames()
        .zip(reference.frames())
        .map(|(e, r)| {
            e.iter()
                .zip(r)
                .map(|(a, b)| {
                    let d = a.as_f64() - b.as_f64();
                    d * d
                })
                .sum()
        })
        .collect())
}

/// Sum squared error over all frames and bins.
pub fn sse<T: Scalar>(estimate: &MagnitudeSpectrogram<T>, reference: &MagnitudeSpectrogram<T>) -> Result<f64> {
    Ok(frame_squared_errors(estimate, reference)?.iter().sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsnrConfig {
    pub frame_len: usize,
    pub hop: usize,
    pub min_db: f64,
    pub max_db: f64,
    /// Frames more than this many dB below the loudest clean frame are skipped.
    pub silence_db: f64,
}

impl Default for SsnrConfig {
    fn default() -> Self {
        Self {
            frame_len: 512,
            hop: 160,
            min_db: -10.0,
            max_db: 35.0,
            silence_db: 40.0,
        }
    }
}

/// Segmental SNR in dB: per-frame `10·log10(Σs² / Σ(s−ŝ)²)` clamped to
/// `[min_db, max_db]`, averaged over non-silent clean frames.
pub fn ssnr<T: Scalar>(clean: &[T], estimate: &[T], cfg: &SsnrConfig) -> Result<f64> {
    if clean.len() != estimate.len() {
        return Err(Error::DimensionMismatch {
            what: "ssnr signal length",
            expected: clean.len(),
            got: estimate.len(),
        });
    }
    if clean.is_empty() {
        return Err(Error::Metric("ssnr of zero-length input".into()));
    }
    if cfg.frame_len == 0 || cfg.hop == 0 {
        return Err(Error::InvalidConfig("ssnr frame and hop must be positive".into()));
    }
    let frame = cfg.frame_len.min(clean.len());
    let n_frames = (clean.len() - frame) / cfg.hop + 1;
    let stats: Vec<(f64, f64)> = (0..n_frames)
        .map(|f| {
            let r = f * cfg.hop..f * cfg.hop + frame;
            clean[r.clone()]
                .iter()
                .zip(&estimate[r])
                .fold((0.0, 0.0), |(s, e), (c, x)| {
                    let (c, x) = (c.as_f64(), x.as_f64());
                    (s + c * c, e + (c - x) * (c - x))
                })
        })
        .collect();
    let max_energy = stats.iter().map(|s| s.0).fold(0.0, f64::max);
    let gate = max_energy * 10f64.powf(-cfg.silence_db / 10.0);
    let voiced: Vec<f64> = stats
        .iter()
        .filter(|(sig, _)| *sig > 0.0 && *sig >= gate)
        .map(|&(sig, err)| {
            let db = if err == 0.0 {
                f64::INFINITY
            } else {
                10.0 * (sig / err).log10()
            };
            db.clamp(cfg.min_db, cfg.max_db)
        })
        .collect();
    if voiced.is_empty() {
        return Err(Error::Metric("no clean frames above the silence gate".into()));
    }
    Ok(voiced.iter().sum::<f64>() / voiced.len() as f64)
}

/// Pearson correlation, or `Undefined` when either series is constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correlation {
    Defined(f64),
    Undefined,
}

impl Correlation {
    pub fn value(self) -> Option<f64> {
        match self {
            Correlation::Defined(r) => Some(r),
            Correlation::Undefined => None,
        }
    }
}

impl fmt::Display for Correlation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Correlation::Defined(r) => write!(f, "{r:.9}"),
            Correlation::Undefined => f.write_str("undefined"),
        }
    }
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Correlation> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            what: "correlation series",
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::Metric("correlation needs at least 2 frames".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correlation series"));
    }
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    if constant(xs) || constant(ys) {
        return Ok(Correlation::Undefined);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(Correlation::Undefined);
    }
    Ok(Correlation::Defined((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)))
}

/// Per-frame squared error paired with predictive uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramePoint {
    pub squared_error: f64,
    pub var_trace: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationStudy {
    pub pearson_r: Correlation,
    pub scatter: Vec<FramePoint>,
}

pub fn correlate(per_frame: &[FramePoint]) -> Result<CorrelationStudy> {
    let se: Vec<f64> = per_frame.iter().map(|p| p.squared_error).collect();
    let var: Vec<f64> = per_frame.iter().map(|p| p.var_trace).collect();
    Ok(CorrelationStudy {
        pearson_r: pearson(&se, &var)?,
        scatter: per_frame.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub sse: f64,
    pub ssnr_db: f64,
    pub n_frames: usize,
    pub per_frame: Vec<FramePoint>,
    pub pearson_r: Correlation,
}

impl EvalReport {
    /// Labeled `key: value` lines.
    pub fn to_text(&self) -> String {
        format!(
            "sse: {:.9e}\nssnr_db: {:.6}\nn_frames: {}\npearson_r: {}\n",
            self.sse, self.ssnr_db, self.n_frames, self.pearson_r
        )
    }

    pub fn per_frame_csv(&self) -> String {
        per_frame_csv(&self.per_frame)
    }
}

/// `frame_idx,squared_error,var_trace` with a header line.
pub fn per_frame_csv(points: &[FramePoint]) -> String {
    let mut s = String::from("frame_idx,squared_error,var_trace\n");
    for (i, p) in points.iter().enumerate() {
        s.push_str(&format!("{i},{:e},{:e}\n", p.squared_error, p.var_trace));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(frames: &[Vec<f64>]) -> MagnitudeSpectrogram<f64> {
        MagnitudeSpectrogram::from_frames(frames, frames[0].len()).unwrap()
    }

    #[test]
    fn sse_basics() {
        let a = spec(&[vec![1.0; 257]]);
        assert_eq!(sse(&a, &a).unwrap(), 0.0);
        let b = spec(&[vec![2.0; 257]]);
        assert_eq!(sse(&a, &b).unwrap(), 257.0);
        let c = spec(&[vec![1.0; 257], vec![1.0; 257]]);
        assert!(sse(&a, &c).is_err());
    }

    fn speechy(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (i as f64 * 0.07).sin() * (1.0 + (i as f64 * 0.001).sin()))
            .collect()
    }

    #[test]
    fn ssnr_perfect_estimate_hits_ceiling() {
        let s = speechy(8000);
        assert_eq!(ssnr(&s, &s, &SsnrConfig::default()).unwrap(), 35.0);
    }

    #[test]
    fn ssnr_zero_estimate_is_zero_db() {
        let s = speechy(8000);
        let z = vec![0.0; 8000];
        assert!(ssnr(&s, &z, &SsnrConfig::default()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn ssnr_errors() {
        assert!(ssnr::<f64>(&[], &[], &SsnrConfig::default()).is_err());
        assert!(ssnr(&[1.0, 2.0], &[1.0], &SsnrConfig::default()).is_err());
    }

    #[test]
    fn ssnr_skips_silence() {
        let mut s = speechy(8000);
        s.extend(vec![0.0; 8000]);
        let mut e: Vec<f64> = s.iter().map(|v| v * 0.9).collect();
        // garbage in the silent half must not matter
        for v in e[8000 + 512..].iter_mut() {
            *v = 0.5;
        }
        let voiced_only = ssnr(&s[..8000], &e[..8000], &SsnrConfig::default()).unwrap();
        let full = ssnr(&s, &e, &SsnrConfig::default()).unwrap();
        assert!(full <= voiced_only + 1e-9);
        assert!((voiced_only - 20.0).abs() < 1e-9);
    }

    #[test]
    fn correlation_extremes() {
        let x: Vec<f64> = (0..20).map(|i| (i as f64).sqrt()).collect();
        assert!((pearson(&x, &x).unwrap().value().unwrap() - 1.0).abs() < 1e-12);
        let y: Vec<f64> = x.iter().map(|v| 5.0 - v).collect();
        assert!((pearson(&x, &y).unwrap().value().unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_series_is_undefined() {
        assert_eq!(
            pearson(&[0.1, 0.1, 0.1], &[1.0, 2.0, 3.0]).unwrap(),
            Correlation::Undefined
        );
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert_eq!(Correlation::Undefined.to_string(), "undefined");
    }

    #[test]
    fn matches_textbook_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..500).map(|_| rng.random_range(0.0..10.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v * 0.3 + rng.random_range(0.0..5.0)).collect();
        let n = x.len() as f64;
        let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|b| b * b).sum();
        let oracle = (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt());
        let r = pearson(&x, &y).unwrap().value().unwrap();
        assert!((r - oracle).abs() < 1e-12, "{r} vs {oracle}");
    }

    #[test]
    fn report_text_and_csv() {
        let pts = vec![
            FramePoint {
                squared_error: 1.0,
                var_trace: 0.5,
            },
            FramePoint {
                squared_error: 2.0,
                var_trace: 0.25,
            },
        ];
        let rep = EvalReport {
            sse: 3.0,
            ssnr_db: 12.5,
            n_frames: 2,
            pearson_r: correlate(&pts).unwrap().pearson_r,
            per_frame: pts,
        };
        let t = rep.to_text();
        assert!(t.contains("ssnr_db: 12.5"));
        assert!(t.contains("pearson_r: -1.000000000"), "{t}");
        assert_eq!(
            rep.per_frame_csv(),
            "frame_idx,squared_error,var_trace\n0,1e0,5e-1\n1,2e0,2.5e-1\n"
        );
    }
}
