//! Little-endian model file:
//!
//! ```text
//! "MCDN"            magic
//! u32               format version
//! u32               arch length n
//! u32 × n           layer widths
//! f64               dropout rate
//! per layer:        f32 weights (row-major out×in), then f32 biases
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::model::{Activation, Layer, MlpModel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"MCDN";
pub const FORMAT_VERSION: u32 = 1;

/// Serializes `model`; parameters are stored as `f32`.
pub fn write_model<T: Scalar, W: Write>(model: &MlpModel<T>, mut w: W) -> Result<()> {
    if model.activation != Activation::Relu {
        return Err(Error::InvalidConfig("model files only hold ReLU networks".into()));
    }
    let arch = model.arch();
    let mut buf = Vec::with_capacity(24 + 4 * arch.len() + 4 * model.n_params());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(arch.len() as u32).to_le_bytes());
    for d in &arch {
        buf.extend_from_slice(&(*d as u32).to_le_bytes());
    }
    buf.extend_from_slice(&model.dropout_rate.to_le_bytes());
    for s in model.param_slices() {
        for v in s {
            buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn save_model<T: Scalar>(model: &MlpModel<T>, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    write_model(model, &mut f)?;
    f.sync_all()?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::CorruptModel(format!("truncated while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn read_model<T: Scalar>(bytes: &[u8]) -> Result<MlpModel<T>> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::NotAModel);
    }
    let mut c = Cursor { bytes, pos: 4 };
    let version = c.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let n = c.u32("arch length")? as usize;
    if !(2..=1024).contains(&n) {
        return Err(Error::CorruptModel(format!("implausible arch length {n}")));
    }
    let arch = (0..n)
        .map(|_| c.u32("arch").map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    if arch.contains(&0) {
        return Err(Error::CorruptModel(format!("zero-width layer in {arch:?}")));
    }
    let dropout_rate = f64::from_le_bytes(c.take(8, "dropout rate")?.try_into().unwrap());
    let expected: usize = arch.windows(2).map(|d| d[0] * d[1] + d[1]).sum::<usize>() * 4;
    let remaining = bytes.len() - c.pos;
    if remaining != expected {
        return Err(Error::CorruptModel(format!(
            "arch {arch:?} needs {expected} parameter bytes, file has {remaining}"
        )));
    }
    let mut read_vec = |len: usize| -> Result<Vec<T>> {
        let raw = c.take(len * 4, "parameters")?;
        raw.chunks_exact(4)
            .map(|b| {
                let v = f32::from_le_bytes(b.try_into().unwrap());
                if v.is_finite() {
                    Ok(T::of(v as f64))
                } else {
                    Err(Error::NonFinite("model parameters"))
                }
            })
            .collect()
    };
    let mut layers = Vec::with_capacity(n - 1);
    for d in arch.windows(2) {
        let weights = read_vec(d[0] * d[1])?;
        let bias = read_vec(d[1])?;
        layers.push(Layer {
            in_dim: d[0],
            out_dim: d[1],
            weights,
            bias,
        });
    }
    MlpModel::from_layers(layers, Activation::Relu, dropout_rate)
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<MlpModel<T>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    read_model(&fs::read(path)?)
}
