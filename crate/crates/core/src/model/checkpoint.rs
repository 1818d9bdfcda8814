//! Binary checkpoints.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic        4 bytes  "SSCK"
//! version      u32      CHECKPOINT_VERSION
//! config       num_items u32, dim u32, max_len u32, num_layers u32,
//!              num_heads u32, negatives u32, batch_size u32, seed u64,
//!              regularizer u32, item_scope u32,
//!              dropout f64, lambda f64, beta f64, learning_rate f64
//! tensors      u32 count, then per tensor:
//!              u32 name length, UTF-8 name, u32 rank, rank × u32 dims,
//!              product(dims) × f32
//! crc32        u32 over every preceding byte
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::config::{ItemScope, ModelConfig, Regularizer};
use crate::model::params::{ModelParams, Tensor};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"SSCK";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(params: &ModelParams, cfg: &ModelConfig) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(&CHECKPOINT_MAGIC);
    let u32s = [
        CHECKPOINT_VERSION,
        params.num_items as u32,
        params.dim as u32,
        params.max_len as u32,
        params.layers.len() as u32,
        params.num_heads as u32,
        cfg.negatives as u32,
        cfg.batch_size as u32,
    ];
    for v in u32s {
        b.extend_from_slice(&v.to_le_bytes());
    }
    b.extend_from_slice(&cfg.seed.to_le_bytes());
    b.extend_from_slice(&cfg.regularizer.code().to_le_bytes());
    let scope: u32 = match cfg.item_scope {
        ItemScope::All => 0,
        ItemScope::Batch => 1,
    };
    b.extend_from_slice(&scope.to_le_bytes());
    for v in [cfg.dropout, cfg.lambda, cfg.beta, cfg.learning_rate] {
        b.extend_from_slice(&v.to_le_bytes());
    }
    let named = params.named_tensors();
    b.extend_from_slice(&(named.len() as u32).to_le_bytes());
    for (name, t) in named {
        b.extend_from_slice(&(name.len() as u32).to_le_bytes());
        b.extend_from_slice(name.as_bytes());
        b.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            b.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &t.data {
            b.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&b);
    b.extend_from_slice(&crc.to_le_bytes());
    b
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ModelParams, ModelConfig)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::IncompatibleCheckpoint(format!(
            "checkpoint version {version}, this build reads version {CHECKPOINT_VERSION}"
        )));
    }
    if bytes.len() < 12 {
        return Err(Error::Format("checkpoint is truncated".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().expect("4 bytes")) {
        return Err(Error::Format("checkpoint checksum mismatch".into()));
    }
    r.buf = body;

    let num_items = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let max_len = r.u32()? as usize;
    let num_layers = r.u32()? as usize;
    let num_heads = r.u32()? as usize;
    let negatives = r.u32()? as usize;
    let batch_size = r.u32()? as usize;
    let seed = r.u64()?;
    let regularizer = Regularizer::from_code(r.u32()?)
        .ok_or_else(|| Error::Format("unknown regularizer code".into()))?;
    let item_scope = match r.u32()? {
        0 => ItemScope::All,
        1 => ItemScope::Batch,
        _ => return Err(Error::Format("unknown item scope code".into())),
    };
    let cfg = ModelConfig {
        dim,
        max_len,
        num_layers,
        num_heads,
        dropout: r.f64()?,
        lambda: r.f64()?,
        beta: r.f64()?,
        negatives,
        learning_rate: r.f64()?,
        batch_size,
        seed,
        regularizer,
        item_scope,
    };
    cfg.validate()
        .map_err(|e| Error::Format(format!("invalid stored config: {e}")))?;

    let mut params = crate::model::init_params_zeroed(&cfg, num_items);
    let expected = params.names();
    let count = r.u32()? as usize;
    if count != expected.len() {
        return Err(Error::Format(format!(
            "checkpoint holds {count} tensors, expected {}",
            expected.len()
        )));
    }
    for (want, t) in expected.iter().zip(params.tensors_mut()) {
        let name = r.string()?;
        if &name != want {
            return Err(Error::Format(format!("expected tensor {want}, found {name}")));
        }
        let rank = r.u32()? as usize;
        let shape = (0..rank)
            .map(|_| r.u32().map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        if shape != t.shape {
            return Err(Error::Format(format!("tensor {name} has shape {shape:?}, expected {:?}", t.shape)));
        }
        read_data(&mut r, t)?;
    }
    if r.pos != body.len() {
        return Err(Error::Format("trailing bytes in checkpoint".into()));
    }
    if !params.is_finite() {
        return Err(Error::Format("checkpoint holds non-finite values".into()));
    }
    Ok((params, cfg))
}

fn read_data(r: &mut Reader<'_>, t: &mut Tensor) -> Result<()> {
    let raw = r.take(t.len() * 4)?;
    for (slot, chunk) in t.data.iter_mut().zip(raw.chunks_exact(4)) {
        *slot = f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64;
    }
    Ok(())
}

pub fn save_checkpoint(params: &ModelParams, cfg: &ModelConfig, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(params, cfg)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, ModelConfig)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format("checkpoint is truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| Error::Format("invalid UTF-8 in checkpoint".into()))
    }
}
