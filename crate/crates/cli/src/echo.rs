//! Fully resolved run configuration, written beside every command's outputs.

use std::path::Path;

use serde::Serialize;

use mcdenoise::{McConfig, StftConfig, TrainConfig};

#[derive(Debug, Serialize)]
pub struct StftEcho {
    pub sample_rate: u32,
    pub frame_len: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub n_bins: usize,
}

impl From<&StftConfig> for StftEcho {
    fn from(c: &StftConfig) -> Self {
        Self {
            sample_rate: c.sample_rate,
            frame_len: c.frame_len,
            hop: c.hop,
            fft_size: c.fft_size,
            n_bins: c.n_bins,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct TrainEcho {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: String,
    pub weight_decay: f64,
    pub dropout_rate: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl From<&TrainConfig> for TrainEcho {
    fn from(c: &TrainConfig) -> Self {
        Self {
            learning_rate: c.learning_rate,
            batch_size: c.batch_size,
            epochs: c.epochs,
            optimizer: format!("{:?}", c.optimizer),
            weight_decay: c.weight_decay,
            dropout_rate: c.dropout_rate,
            hidden: c.hidden.clone(),
            seed: c.seed,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct McEcho {
    pub mode: String,
    pub t_passes: usize,
    pub seed: u64,
    pub tau_inv: f64,
}

impl McEcho {
    pub fn new(mode: &str, c: &McConfig) -> Self {
        Self {
            mode: mode.into(),
            t_passes: c.t_passes,
            seed: c.seed,
            tau_inv: c.tau_inv,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunEcho {
    pub command: String,
    pub seed: u64,
    pub paths: Vec<(String, String)>,
    pub stft: StftEcho,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainEcho>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<McEcho>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub extra: Vec<(String, String)>,
}

impl RunEcho {
    pub fn new(command: &str, seed: u64, stft: &StftConfig) -> Self {
        Self {
            command: command.into(),
            seed,
            paths: Vec::new(),
            stft: stft.into(),
            train: None,
            mc: None,
            extra: Vec::new(),
        }
    }

    pub fn path(mut self, key: &str, p: &Path) -> Self {
        self.paths.push((key.into(), p.display().to_string()));
        self
    }

    pub fn extra(mut self, key: &str, v: impl ToString) -> Self {
        self.extra.push((key.into(), v.to_string()));
        self
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }
}
