//! Additive noisy-speech synthesis at exact SNRs and dataset manifests.
//!
//! SNR is defined on full-signal mean-square power: the noise segment is
//! scaled by `g = sqrt(P_speech / (P_noise · 10^(snr/10)))` and added.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::dsp::{mean_square, Waveform};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;
use crate::wav;

/// SNR grid used for training mixtures.
pub const TRAIN_SNRS_DB: [f64; 3] = [0.0, 5.0, 10.0];

/// Fully resolved description of one mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct MixSpec {
    pub clean_id: String,
    pub noise_id: String,
    pub snr_db: f64,
    pub noise_offset: usize,
    pub seed: u64,
}

/// `len` noise samples starting at `offset`, tiling with wrap-around.
pub fn noise_segment<T: Scalar>(noise: &[T], offset: usize, len: usize) -> Vec<T> {
    if noise.is_empty() {
        return Vec::new();
    }
    (0..len).map(|i| noise[(offset + i) % noise.len()]).collect()
}

/// Gain applied to `noise_segment` so that speech over scaled noise is `snr_db`.
pub fn snr_gain<T: Scalar>(speech: &[T], noise_segment: &[T], snr_db: f64) -> Result<f64> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidConfig(format!("snr_db must be finite, got {snr_db}")));
    }
    let ps = mean_square(speech);
    let pn = mean_square(noise_segment);
    if ps.is_nan() || ps <= 0.0 {
        return Err(Error::DegeneratePower("speech has zero power"));
    }
    if pn.is_nan() || pn <= 0.0 {
        return Err(Error::DegeneratePower("noise segment has zero power"));
    }
    Ok((ps / (pn * 10f64.powf(snr_db / 10.0))).sqrt())
}

/// `speech + g · noise[offset..]` at the requested SNR.
pub fn mix_at_snr<T: Scalar>(
    speech: &Waveform<T>,
    noise: &Waveform<T>,
    snr_db: f64,
    offset: usize,
) -> Result<Waveform<T>> {
    Ok(mix_detailed(speech, noise, snr_db, offset)?.0)
}

/// Like [`mix_at_snr`] but also returns the gain and the scaled noise.
pub fn mix_detailed<T: Scalar>(
    speech: &Waveform<T>,
    noise: &Waveform<T>,
    snr_db: f64,
    offset: usize,
) -> Result<(Waveform<T>, f64, Vec<T>)> {
    if speech.sample_rate != noise.sample_rate {
        return Err(Error::InvalidConfig(format!(
            "sample rate mismatch: speech {} Hz, noise {} Hz",
            speech.sample_rate, noise.sample_rate
        )));
    }
    let seg = noise_segment(&noise.samples, offset, speech.len());
    let g = snr_gain(&speech.samples, &seg, snr_db)?;
    let scaled: Vec<T> = seg.iter().map(|n| T::of(g * n.as_f64())).collect();
    let samples = speech
        .samples
        .iter()
        .zip(&seg)
        .map(|(s, n)| T::of(s.as_f64() + g * n.as_f64()))
        .collect();
    Ok((
        Waveform {
            samples,
            sample_rate: speech.sample_rate,
        },
        g,
        scaled,
    ))
}

/// `10·log10(P_speech / P_noise)` in dB.
pub fn measured_snr_db<T: Scalar>(speech: &[T], noise: &[T]) -> f64 {
    10.0 * (mean_square(speech) / mean_square(noise)).log10()
}

/// Seeded start offset: uniform over the valid range when the noise is
/// longer than the speech, 0 (wrap-around tiling) otherwise.
pub fn choose_offset(speech_len: usize, noise_len: usize, seed: u64) -> usize {
    if noise_len <= speech_len {
        return 0;
    }
    seed::stream_rng(seed, 0x6f66_6673).random_range(0..=noise_len - speech_len)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Split {
    #[default]
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub clean: PathBuf,
    pub noise: PathBuf,
    pub snrs_db: Vec<f64>,
}

/// One (clean, noise, snr) combination to render.
#[derive(Debug, Clone, PartialEq)]
pub struct MixJob {
    pub index: usize,
    pub clean: PathBuf,
    pub noise: PathBuf,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub split: Split,
}

impl DatasetManifest {
    /// Parses manifest text without touching the filesystem. Relative paths
    /// are resolved against `base_dir`.
    ///
    /// Format: `<clean.wav>\t<noise.wav>\t<snr,snr,...>` per line, `#`
    /// comments, and an optional `# split: train|test` directive.
    pub fn parse(text: &str, base_dir: &Path, origin: &Path) -> Result<Self> {
        let mut manifest = DatasetManifest::default();
        let perr = |line: usize, msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            msg,
        };
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(tag) = comment.trim().strip_prefix("split:") {
                    manifest.split = match tag.trim() {
                        "train" => Split::Train,
                        "test" => Split::Test,
                        other => return Err(perr(line_no, format!("unknown split '{other}'"))),
                    };
                }
                continue;
            }
            let cols: Vec<&str> = raw.split('\t').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(perr(
                    line_no,
                    format!("expected 3 tab-separated columns, found {}", cols.len()),
                ));
            }
            let snrs_db = cols[2]
                .split(',')
                .map(|s| {
                    let v: f64 = s
                        .trim()
                        .parse()
                        .map_err(|_| perr(line_no, format!("bad SNR value '{}'", s.trim())))?;
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(perr(line_no, format!("non-finite SNR '{}'", s.trim())))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let resolve = |p: &str| {
                let p = Path::new(p);
                if p.is_absolute() {
                    p.to_path_buf()
                } else {
                    base_dir.join(p)
                }
            };
            manifest.entries.push(ManifestEntry {
                clean: resolve(cols[0]),
                noise: resolve(cols[1]),
                snrs_db,
            });
        }
        Ok(manifest)
    }

    /// Checks that every referenced file exists and is mono 16 kHz.
    pub fn validate(&self) -> Result<()> {
        for e in &self.entries {
            wav::probe(&e.clean)?;
            wav::probe(&e.noise)?;
        }
        Ok(())
    }

    /// Cartesian enumeration of (entry, snr) mix jobs in file order.
    pub fn jobs(&self) -> Vec<MixJob> {
        self.entries
            .iter()
            .flat_map(|e| e.snrs_db.iter().map(move |&snr| (e, snr)))
            .enumerate()
            .map(|(index, (e, snr_db))| MixJob {
                index,
                clean: e.clean.clone(),
                noise: e.noise.clone(),
                snr_db,
            })
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Reads and validates a manifest file.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let m = DatasetManifest::parse(&text, base, path)?;
    m.validate()?;
    Ok(m)
}

/// A rendered mixture with its clean reference.
#[derive(Debug, Clone)]
pub struct RenderedMix<T> {
    pub job: MixJob,
    pub spec: MixSpec,
    pub clean: Waveform<T>,
    pub noisy: Waveform<T>,
    pub gain: f64,
}

/// Renders every job of `manifest`; the noise offset of job `i` is drawn
/// from `derive(seed, i)`. Audio files are read once each.
pub fn render_jobs<T: Scalar>(manifest: &DatasetManifest, seed: u64) -> Result<Vec<RenderedMix<T>>> {
    let mut cache: HashMap<PathBuf, Waveform<T>> = HashMap::new();
    let mut out = Vec::new();
    for job in manifest.jobs() {
        for p in [&job.clean, &job.noise] {
            if !cache.contains_key(p) {
                cache.insert(p.clone(), wav::read_wav(p)?);
            }
        }
        let clean = &cache[&job.clean];
        let noise = &cache[&job.noise];
        let job_seed = seed::derive(seed, job.index as u64);
        let offset = choose_offset(clean.len(), noise.len(), job_seed);
        let (noisy, gain, _) = mix_detailed(clean, noise, job.snr_db, offset)?;
        out.push(RenderedMix {
            spec: MixSpec {
                clean_id: job.clean.display().to_string(),
                noise_id: job.noise.display().to_string(),
                snr_db: job.snr_db,
                noise_offset: offset,
                seed: job_seed,
            },
            clean: clean.clone(),
            noisy,
            gain,
            job,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(v: Vec<f64>) -> Waveform<f64> {
        Waveform::new(v, 16_000).unwrap()
    }

    #[test]
    fn equal_power_at_zero_db() {
        let s = w(vec![1.0, 1.0, 1.0, 1.0]);
        let n = w(vec![1.0, -1.0, 1.0, -1.0]);
        let (out, g, _) = mix_detailed(&s, &n, 0.0, 0).unwrap();
        assert_eq!(g, 1.0);
        assert_eq!(out.samples, vec![2.0, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn ten_db_gain_closed_form() {
        let s = w(vec![1.0, 1.0, 1.0, 1.0]);
        let n = w(vec![1.0, -1.0, 1.0, -1.0]);
        let (_, g, scaled) = mix_detailed(&s, &n, 10.0, 0).unwrap();
        assert!((g - 0.1f64.sqrt()).abs() < 1e-15);
        assert!((measured_snr_db(&s.samples, &scaled) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_power_rejected() {
        let s = w(vec![0.0; 4]);
        let n = w(vec![1.0, -1.0, 1.0, -1.0]);
        assert!(matches!(mix_at_snr(&s, &n, 0.0, 0), Err(Error::DegeneratePower(_))));
        let s = w(vec![1.0; 4]);
        let n = w(vec![0.0; 8]);
        let err = mix_at_snr(&s, &n, 0.0, 0).unwrap_err();
        assert!(err.to_string().contains("degenerate power"));
    }

    #[test]
    fn short_noise_wraps() {
        assert_eq!(noise_segment(&[1.0, 2.0, 3.0], 2, 5), vec![3.0, 1.0, 2.0, 3.0, 1.0]);
        assert_eq!(choose_offset(10, 5, 1), 0);
        let o = choose_offset(10, 50, 1);
        assert!(o <= 40);
        assert_eq!(o, choose_offset(10, 50, 1));
    }

    #[test]
    fn training_grid() {
        assert_eq!(TRAIN_SNRS_DB, [0.0, 5.0, 10.0]);
    }

    #[test]
    fn empty_manifest_is_valid() {
        let m = DatasetManifest::parse("", Path::new("."), Path::new("m.tsv")).unwrap();
        assert!(m.is_empty());
        m.validate().unwrap();
        let m = DatasetManifest::parse("# nothing here\n\n", Path::new("."), Path::new("m.tsv")).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn cartesian_job_count() {
        let text = "a.wav\tn.wav\t0,5,10\nb.wav\tn.wav\t0, 5, 10\n";
        let m = DatasetManifest::parse(text, Path::new("/data"), Path::new("m.tsv")).unwrap();
        let jobs = m.jobs();
        assert_eq!(jobs.len(), 6);
        assert_eq!(jobs[4].clean, PathBuf::from("/data/b.wav"));
        assert_eq!(jobs[4].snr_db, 5.0);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "# header\na.wav\tn.wav\t0,x\n";
        let err = DatasetManifest::parse(text, Path::new("."), Path::new("m.tsv")).unwrap_err();
        assert!(err.to_string().starts_with("m.tsv:2:"), "{err}");
        let err = DatasetManifest::parse("a.wav n.wav 0", Path::new("."), Path::new("m.tsv")).unwrap_err();
        assert!(err.to_string().contains(":1:"));
    }

    #[test]
    fn split_directive() {
        let m = DatasetManifest::parse("# split: test\n", Path::new("."), Path::new("m")).unwrap();
        assert_eq!(m.split, Split::Test);
    }

    #[test]
    fn missing_referenced_file_named() {
        let dir = tempfile::tempdir().unwrap();
        let mp = dir.path().join("m.tsv");
        fs::write(&mp, "missing_clean.wav\tn.wav\t0\n").unwrap();
        let err = load_manifest(&mp).unwrap_err();
        assert!(err.to_string().contains("missing_clean.wav"), "{err}");
    }

    #[test]
    fn missing_manifest_named() {
        let err = load_manifest(Path::new("/no/such/manifest.tsv")).unwrap_err();
        assert!(err.to_string().contains("/no/such/manifest.tsv"));
    }
}
