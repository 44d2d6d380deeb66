use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use mcdenoise::metrics::{correlate, frame_squared_errors, per_frame_csv, CorrelationStudy, FramePoint};
use mcdenoise::mixer::{self, measured_snr_db};
use mcdenoise::nn::{self, OptimizerKind};
use mcdenoise::selector::selection_log;
use mcdenoise::wav::{self, WavEncoding};
use mcdenoise::{
    enhance, enhance_multi, load_manifest, load_model, save_model, ssnr, synth, EvalReport, Inference, McConfig, Mlp32,
    ModelBank, SeedPolicy, SsnrConfig, Stft, StftConfig, TrainConfig, Waveform,
};

use crate::args::*;
use crate::echo::{McEcho, RunEcho, TrainEcho};

/// Dispatches `cli` inside a thread pool sized by `--threads`.
pub fn run(cli: &Cli) -> Result<()> {
    let stft = stft_config(&cli.stft)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .context("building thread pool")?;
    pool.install(|| match &cli.command {
        Command::Mix(a) => cmd_mix(a, &stft, cli.seed).map(|_| ()),
        Command::Train(a) => cmd_train(a, &stft, cli.seed).map(|_| ()),
        Command::Enhance(a) => cmd_enhance(a, &stft, cli.seed).map(|_| ()),
        Command::EnhanceMulti(a) => cmd_enhance_multi(a, &stft, cli.seed).map(|_| ()),
        Command::Evaluate(a) => {
            let r = cmd_evaluate(a, &stft)?;
            print!("{}", r.to_text());
            Ok(())
        }
        Command::Correlate(a) => {
            let s = cmd_correlate(a, &stft, cli.seed)?;
            println!("pearson_r: {}", s.pearson_r);
            Ok(())
        }
        Command::Synth(a) => cmd_synth(a, cli.seed),
    })
}

pub fn stft_config(a: &StftArgs) -> Result<StftConfig> {
    let cfg = StftConfig {
        sample_rate: wav::REQUIRED_SAMPLE_RATE,
        frame_len: a.frame_len,
        hop: a.hop,
        fft_size: a.fft_size,
        n_bins: a.fft_size / 2 + 1,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes through a temporary file so a failed run never leaves a partial
/// output under the final name.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = sibling(path, ".tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

fn write_wav_atomic(path: &Path, w: &Waveform<f32>, enc: WavEncoding) -> Result<()> {
    let tmp = sibling(path, ".tmp");
    wav::write_wav(&tmp, w, enc).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

fn write_echo(echo: &RunEcho, path: &Path) -> Result<()> {
    write_atomic(path, echo.to_toml()?.as_bytes())
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent() {
        if !p.as_os_str().is_empty() {
            fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))?;
        }
    }
    Ok(())
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[derive(Debug, Clone)]
pub struct MixSummary {
    pub files: Vec<PathBuf>,
    pub index: PathBuf,
    pub achieved_snr_db: Vec<f64>,
}

/// One WAV per (clean, noise, snr) plus `index.tsv` recording the target and
/// the SNR re-measured from the written files.
pub fn cmd_mix(a: &MixArgs, stft: &StftConfig, seed: u64) -> Result<MixSummary> {
    let manifest = load_manifest(&a.manifest)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let enc = match a.encoding {
        Encoding::F32 => WavEncoding::Float32,
        Encoding::Pcm16 => WavEncoding::Pcm16,
    };
    let mixes = mixer::render_jobs::<f64>(&manifest, seed)?;
    let mut index = String::from("file\tclean\tnoise\tsnr_db\tachieved_snr_db\tnoise_offset\tgain\n");
    let mut summary = MixSummary {
        files: Vec::new(),
        index: a.out_dir.join("index.tsv"),
        achieved_snr_db: Vec::new(),
    };
    for m in &mixes {
        let name = format!(
            "mix_{:04}_{}_{}_{}dB.wav",
            m.job.index,
            stem(&m.job.clean),
            stem(&m.job.noise),
            m.job.snr_db
        );
        let path = a.out_dir.join(&name);
        write_wav_atomic(&path, &m.noisy.cast(), enc)?;
        let noisy: Waveform<f64> = wav::read_wav(&path)?;
        let clean: Waveform<f64> = wav::read_wav(&m.job.clean)?;
        let residual: Vec<f64> = noisy.samples.iter().zip(&clean.samples).map(|(x, s)| x - s).collect();
        let achieved = measured_snr_db(&clean.samples, &residual);
        index.push_str(&format!(
            "{name}\t{}\t{}\t{}\t{achieved:.12}\t{}\t{:.12e}\n",
            m.job.clean.display(),
            m.job.noise.display(),
            m.job.snr_db,
            m.spec.noise_offset,
            m.gain
        ));
        summary.files.push(path);
        summary.achieved_snr_db.push(achieved);
    }
    write_atomic(&summary.index, index.as_bytes())?;
    let echo = RunEcho::new("mix", seed, stft)
        .path("manifest", &a.manifest)
        .path("out_dir", &a.out_dir)
        .extra("encoding", format!("{:?}", a.encoding))
        .extra("jobs", mixes.len());
    write_echo(&echo, &a.out_dir.join("config.toml"))?;
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub model: PathBuf,
    pub loss_log: Vec<f64>,
}

pub fn train_config(a: &TrainArgs, seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: a.lr,
        batch_size: a.batch_size,
        epochs: a.epochs,
        optimizer: match a.optimizer {
            OptimizerArg::Adam => OptimizerKind::Adam {
                beta1: a.beta1,
                beta2: a.beta2,
                eps: a.eps,
            },
            OptimizerArg::Sgd => OptimizerKind::Sgd,
        },
        weight_decay: a.weight_decay,
        seed,
        dropout_rate: a.dropout,
        hidden: a.hidden.clone(),
    }
}

/// Trains a model and writes it with `<model>.loss.csv` and `<model>.config.toml`.
pub fn cmd_train(a: &TrainArgs, stft: &StftConfig, seed: u64) -> Result<TrainSummary> {
    let cfg = train_config(a, seed);
    cfg.validate()?;
    let manifest = load_manifest(&a.manifest)?;
    if manifest.is_empty() {
        bail!("manifest {} lists no training data", a.manifest.display());
    }
    if a.lr == 0.0 {
        log::warn!("--lr 0: the written model keeps its initial parameters");
    }
    let model: Mlp32 = nn::train(&manifest, stft, &cfg)?;
    ensure_parent(&a.out)?;
    let tmp = sibling(&a.out, ".tmp");
    save_model(&model, &tmp)?;
    fs::rename(&tmp, &a.out)?;
    let mut log = String::from("epoch,loss\n");
    for (i, l) in model.meta.loss_log.iter().enumerate() {
        log.push_str(&format!("{},{l:.9e}\n", i + 1));
    }
    write_atomic(&sibling(&a.out, ".loss.csv"), log.as_bytes())?;
    let mut echo = RunEcho::new("train", seed, stft)
        .path("manifest", &a.manifest)
        .path("model", &a.out);
    echo.train = Some(TrainEcho::from(&cfg));
    write_echo(&echo, &sibling(&a.out, ".config.toml"))?;
    Ok(TrainSummary {
        model: a.out.clone(),
        loss_log: model.meta.loss_log,
    })
}

fn mc_config(a: &McArgs, seed: u64) -> McConfig {
    McConfig {
        t_passes: a.t_passes,
        seed,
        tau_inv: a.tau_inv,
    }
}

#[derive(Debug, Clone)]
pub struct EnhanceSummary {
    pub output: PathBuf,
    pub uncertainty_csv: PathBuf,
    pub var_traces: Vec<f64>,
}

fn uncertainty_csv(traces: &[f64]) -> String {
    let mut s = String::from("frame_idx,var_trace\n");
    for (i, v) in traces.iter().enumerate() {
        s.push_str(&format!("{i},{v:e}\n"));
    }
    s
}

/// Enhanced WAV plus `<output>.uncertainty.csv` (one row per frame).
pub fn cmd_enhance(a: &EnhanceArgs, stft: &StftConfig, seed: u64) -> Result<EnhanceSummary> {
    let model: Mlp32 = load_model(&a.model)?;
    let noisy: Waveform<f32> = wav::read_wav(&a.input)?;
    let mc = mc_config(&a.mc_args, seed);
    let (mode, label) = if a.deterministic {
        (Inference::Deterministic, "deterministic")
    } else {
        mc.validate()?;
        (Inference::MonteCarlo(mc), "mc")
    };
    let out = enhance(&model, &noisy, stft, mode)?;
    ensure_parent(&a.output)?;
    write_wav_atomic(&a.output, &out.waveform, WavEncoding::Float32)?;
    let traces: Vec<f64> = out.var_traces.iter().map(|&v| v as f64).collect();
    let csv = sibling(&a.output, ".uncertainty.csv");
    write_atomic(&csv, uncertainty_csv(&traces).as_bytes())?;
    let mut echo = RunEcho::new("enhance", seed, stft)
        .path("model", &a.model)
        .path("input", &a.input)
        .path("output", &a.output);
    echo.mc = Some(McEcho::new(label, &mc));
    write_echo(&echo, &sibling(&a.output, ".config.toml"))?;
    Ok(EnhanceSummary {
        output: a.output.clone(),
        uncertainty_csv: csv,
        var_traces: traces,
    })
}

#[derive(Debug, Clone)]
pub struct MultiSummary {
    pub output: PathBuf,
    pub selection_log: PathBuf,
    pub chosen: Vec<usize>,
}

/// Enhanced WAV plus `<output>.selection.csv`.
pub fn cmd_enhance_multi(a: &EnhanceMultiArgs, stft: &StftConfig, seed: u64) -> Result<MultiSummary> {
    let mut models = Vec::with_capacity(a.models.len());
    for (i, p) in a.models.iter().enumerate() {
        // Ids show up in the selection log, so keep them distinct.
        let mut id = stem(p);
        if a.models.iter().filter(|q| stem(q) == id).count() > 1 {
            id = format!("{id}#{i}");
        }
        models.push((id, load_model::<f32>(p)?));
    }
    let bank = ModelBank::new(models)?;
    let noisy: Waveform<f32> = wav::read_wav(&a.input)?;
    let mc = mc_config(&a.mc_args, seed);
    let policy = match a.seed_policy {
        SeedPolicyArg::Independent => SeedPolicy::Independent,
        SeedPolicyArg::Shared => SeedPolicy::Shared,
    };
    let out = enhance_multi(&bank, &noisy, stft, &mc, policy)?;
    ensure_parent(&a.output)?;
    write_wav_atomic(&a.output, &out.waveform, WavEncoding::Float32)?;
    let log_path = sibling(&a.output, ".selection.csv");
    write_atomic(&log_path, selection_log(&bank, &out.selections).as_bytes())?;
    let mut echo = RunEcho::new("enhance-multi", seed, stft)
        .path("input", &a.input)
        .path("output", &a.output)
        .extra("seed_policy", format!("{:?}", a.seed_policy));
    for m in &a.models {
        echo = echo.path("model", m);
    }
    echo.mc = Some(McEcho::new("mc", &mc));
    write_echo(&echo, &sibling(&a.output, ".config.toml"))?;
    Ok(MultiSummary {
        output: a.output.clone(),
        selection_log: log_path,
        chosen: out.selections.iter().map(|s| s.chosen).collect(),
    })
}

/// Reads a `frame_idx,var_trace` CSV written by `enhance`.
pub fn read_uncertainty_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .skip(1)
        .enumerate()
        .map(|(i, l)| {
            let v = l
                .split(',')
                .nth(1)
                .with_context(|| format!("{}:{}: missing column", path.display(), i + 2))?;
            v.trim()
                .parse::<f64>()
                .with_context(|| format!("{}:{}: bad value '{v}'", path.display(), i + 2))
        })
        .collect()
}

/// Spectral SSE and SSNR of `test` against `clean`; writes the labeled report
/// and `<output>.frames.csv`.
pub fn cmd_evaluate(a: &EvaluateArgs, stft: &StftConfig) -> Result<EvalReport> {
    let clean: Waveform<f64> = wav::read_wav(&a.clean)?;
    let test: Waveform<f64> = wav::read_wav(&a.test)?;
    if clean.len() != test.len() {
        bail!(
            "length mismatch: {} has {} samples, {} has {}",
            a.clean.display(),
            clean.len(),
            a.test.display(),
            test.len()
        );
    }
    let engine = Stft::new(*stft)?;
    let (cm, _) = engine.analyze(&clean)?;
    let (tm, _) = engine.analyze(&test)?;
    let se = frame_squared_errors(&tm, &cm)?;
    let traces = match &a.uncertainty {
        Some(p) => {
            let t = read_uncertainty_csv(p)?;
            if t.len() != se.len() {
                bail!("{} has {} rows, expected {} frames", p.display(), t.len(), se.len());
            }
            t
        }
        None => vec![0.0; se.len()],
    };
    let per_frame: Vec<FramePoint> = se
        .iter()
        .zip(&traces)
        .map(|(&squared_error, &var_trace)| FramePoint {
            squared_error,
            var_trace,
        })
        .collect();
    let pearson_r = if per_frame.len() >= 2 {
        correlate(&per_frame)?.pearson_r
    } else {
        mcdenoise::Correlation::Undefined
    };
    let ssnr_cfg = SsnrConfig {
        frame_len: stft.frame_len,
        hop: stft.hop,
        ..Default::default()
    };
    let report = EvalReport {
        sse: se.iter().sum(),
        ssnr_db: ssnr(&clean.samples, &test.samples, &ssnr_cfg)?,
        n_frames: se.len(),
        per_frame,
        pearson_r,
    };
    ensure_parent(&a.output)?;
    write_atomic(&a.output, report.to_text().as_bytes())?;
    write_atomic(&sibling(&a.output, ".frames.csv"), report.per_frame_csv().as_bytes())?;
    Ok(report)
}

/// Per-frame `(squared_error, var_trace)` of the MC estimate against the
/// clean magnitudes, written as CSV with a Pearson summary beside it.
pub fn cmd_correlate(a: &CorrelateArgs, stft: &StftConfig, seed: u64) -> Result<CorrelationStudy> {
    let model: Mlp32 = load_model(&a.model)?;
    let clean: Waveform<f32> = wav::read_wav(&a.clean)?;
    let noisy: Waveform<f32> = wav::read_wav(&a.noisy)?;
    if clean.len() != noisy.len() {
        bail!(
            "length mismatch: clean {} vs noisy {} samples",
            clean.len(),
            noisy.len()
        );
    }
    let mc = mc_config(&a.mc_args, seed);
    mc.validate()?;
    let out = enhance(&model, &noisy, stft, Inference::MonteCarlo(mc))?;
    let (cm, _) = Stft::new(*stft)?.analyze(&clean)?;
    let se = frame_squared_errors(&out.estimate, &cm)?;
    let points: Vec<FramePoint> = se
        .iter()
        .zip(&out.var_traces)
        .map(|(&squared_error, &v)| FramePoint {
            squared_error,
            var_trace: v as f64,
        })
        .collect();
    let study = correlate(&points)?;
    ensure_parent(&a.output)?;
    write_atomic(&a.output, per_frame_csv(&points).as_bytes())?;
    write_atomic(
        &sibling(&a.output, ".summary.txt"),
        format!("n_frames: {}\npearson_r: {}\n", points.len(), study.pearson_r).as_bytes(),
    )?;
    let mut echo = RunEcho::new("correlate", seed, stft)
        .path("model", &a.model)
        .path("clean", &a.clean)
        .path("noisy", &a.noisy)
        .path("output", &a.output);
    echo.mc = Some(McEcho::new("mc", &mc));
    write_echo(&echo, &sibling(&a.output, ".config.toml"))?;
    Ok(study)
}

pub fn cmd_synth(a: &SynthArgs, seed: u64) -> Result<()> {
    let sr = wav::REQUIRED_SAMPLE_RATE;
    if a.seconds.is_nan() || a.seconds <= 0.0 {
        bail!("--seconds must be positive");
    }
    let w: Waveform<f64> = match a.kind {
        SynthKind::Speech => synth::speech_like(a.seconds, sr, a.rms, seed),
        k => {
            let kind = match k {
                SynthKind::White => synth::NoiseKind::White,
                SynthKind::Pink => synth::NoiseKind::Pink,
                SynthKind::Brown => synth::NoiseKind::Brown,
                _ => synth::NoiseKind::Blue,
            };
            let mut n = synth::noise(kind, (a.seconds * sr as f64).round() as usize, sr, seed);
            n.samples.iter_mut().for_each(|v| *v *= a.rms);
            n
        }
    };
    ensure_parent(&a.output)?;
    write_wav_atomic(&a.output, &w.cast(), WavEncoding::Float32)
}
