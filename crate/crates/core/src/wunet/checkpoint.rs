//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! magic "WUN1" | u32 version | u32 len + config JSON | f64 test MSE (NaN = none)
//! u32 count | count x (u32 len + name | u32 ndim | ndim x u32 dim | f32 data)
//! ```

use std::path::Path;

use super::{WUNet, WUNetConfig};
use crate::autodiff::Tensor;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"WUN1";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A decoded checkpoint: configuration, optional test MSE and named weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: WUNetConfig,
    pub test_mse: Option<f64>,
    pub params: Vec<(String, Tensor<f32>)>,
}

impl Checkpoint {
    pub fn from_model(model: &WUNet) -> Self {
        Self {
            config: model.config().clone(),
            test_mse: model.test_mse,
            params: model.named_params().map(|(n, t)| (n.to_string(), t.clone())).collect(),
        }
    }

    pub fn into_model(self) -> Result<WUNet> {
        WUNet::from_parts(self.config, self.params, self.test_mse)
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let json = serde_json::to_vec(&self.config).map_err(|e| Error::Format(e.to_string()))?;
        let mut out = Vec::new();
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        put_u32(&mut out, CHECKPOINT_VERSION);
        put_u32(&mut out, json.len() as u32);
        out.extend_from_slice(&json);
        out.extend_from_slice(&self.test_mse.unwrap_or(f64::NAN).to_le_bytes());
        put_u32(&mut out, self.params.len() as u32);
        for (name, t) in &self.params {
            put_u32(&mut out, name.len() as u32);
            out.extend_from_slice(name.as_bytes());
            put_u32(&mut out, t.shape().len() as u32);
            for &d in t.shape() {
                put_u32(&mut out, d as u32);
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4, "magic")?.try_into().expect("4 bytes");
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let found = r.u32("version")?;
        if found != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch {
                found,
                expected: CHECKPOINT_VERSION,
            });
        }
        let n = r.u32("config length")? as usize;
        let config: WUNetConfig =
            serde_json::from_slice(r.take(n, "config")?).map_err(|e| Error::Format(format!("checkpoint config: {e}")))?;
        let mse = f64::from_le_bytes(r.take(8, "test mse")?.try_into().expect("8 bytes"));
        let count = r.u32("parameter count")? as usize;
        let mut params = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let len = r.u32("name length")? as usize;
            let name = std::str::from_utf8(r.take(len, "name")?)
                .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?
                .to_string();
            let ndim = r.u32("rank")? as usize;
            let mut shape = Vec::with_capacity(ndim.min(8));
            for _ in 0..ndim {
                shape.push(r.u32("dimension")? as usize);
            }
            let numel = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| Error::Format(format!("{name}: shape overflows")))?;
            let raw = r.take(numel.saturating_mul(4), &name)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            params.push((name, Tensor::parameter(shape, data)?));
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self {
            config,
            test_mse: (!mse.is_nan()).then_some(mse),
            params,
        })
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Truncated(format!("{what} at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

pub fn save_checkpoint(model: &WUNet, path: &Path) -> Result<()> {
    let bytes = Checkpoint::from_model(model).encode()?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<WUNet> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::decode(&bytes)?.into_model()
}
