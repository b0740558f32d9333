//! Checkpoint file (`.aaim`), little-endian:
//!
//! ```text
//! "AAIM" | version u32 = 1
//! | input_dim u32 | embedding_dim u32 | acoustic_units u32 | speaker_units u32
//! | hidden u32 | layers u32 | output_dim u32
//! | tag_len u16 | source_tag | scope_len u16 | subject_scope
//! | tensor_count u32 | per tensor: n u32, n f64 values
//! ```
//!
//! Tensor order: acoustic_dense.{w,b}, speaker_dense.{w,b}, then for each
//! BLSTM layer the forward and backward directions' {w_ih, w_hh, b}, then
//! head.{w,b}. Weight matrices are row-major `in × out`.

use std::path::Path;

use super::{ModelParams, NetConfig};
use crate::error::{AaiError, Result};
use crate::featio::FORMAT_VERSION;
use crate::featio::format::{put_str, read_bytes, write_bytes, ByteReader};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"AAIM";

/// Trained parameters plus the metadata needed to reuse them safely.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    /// Feature type the model was trained on, e.g. "mfcc".
    pub source_tag: String,
    /// Subjects the model was trained on.
    pub scope: String,
}

impl Checkpoint {
    /// Errors unless the checkpoint accepts `input_dim`-wide features of type
    /// `source_tag` with `embedding_dim`-wide speaker embeddings.
    pub fn check_compatible(&self, input_dim: usize, embedding_dim: usize, source_tag: &str) -> Result<()> {
        let cfg = &self.params.config;
        if cfg.input_dim != input_dim {
            return Err(AaiError::Incompatible(format!(
                "checkpoint expects input dim {}, corpus provides {input_dim}",
                cfg.input_dim
            )));
        }
        if cfg.embedding_dim != embedding_dim {
            return Err(AaiError::Incompatible(format!(
                "checkpoint expects embedding dim {}, corpus provides {embedding_dim}",
                cfg.embedding_dim
            )));
        }
        if self.source_tag != source_tag {
            return Err(AaiError::Incompatible(format!(
                "checkpoint was trained on '{}' features, requested '{source_tag}'",
                self.source_tag
            )));
        }
        Ok(())
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let p = &ckpt.params;
    let c = &p.config;
    let mut buf = Vec::with_capacity(64 + p.n_parameters() * 8);
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [
        c.input_dim,
        c.embedding_dim,
        c.acoustic_units,
        c.speaker_units,
        c.hidden,
        c.layers,
        c.output_dim,
    ] {
        let v = u32::try_from(v).map_err(|_| AaiError::invalid("layer size exceeds u32"))?;
        buf.extend_from_slice(&v.to_le_bytes());
    }
    put_str(&mut buf, &ckpt.source_tag)?;
    put_str(&mut buf, &ckpt.scope)?;
    let tensors = p.tensors();
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (_, t) in tensors {
        buf.extend_from_slice(&(t.len() as u32).to_le_bytes());
        for v in t {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    write_bytes(path.as_ref(), &buf)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let mut r = ByteReader::new(path, &bytes);
    r.magic(CHECKPOINT_MAGIC)?;
    r.version()?;
    let mut dims = [0usize; 7];
    for d in &mut dims {
        *d = r.u32("network dimensions")? as usize;
    }
    let config = NetConfig {
        input_dim: dims[0],
        embedding_dim: dims[1],
        acoustic_units: dims[2],
        speaker_units: dims[3],
        hidden: dims[4],
        layers: dims[5],
        output_dim: dims[6],
    };
    config
        .validate()
        .map_err(|e| r.error(8, format!("bad network dimensions: {e}")))?;
    let source_tag = r.string("source tag")?;
    let scope = r.string("subject scope")?;

    let mut params = ModelParams::zeros(config)?;
    let count_at = r.pos();
    let count = r.u32("tensor count")? as usize;
    let mut tensors = params.tensors_mut();
    if count != tensors.len() {
        return Err(r.error(
            count_at,
            format!("{count} tensors stored, network shape needs {}", tensors.len()),
        ));
    }
    for t in tensors.iter_mut() {
        let at = r.pos();
        let n = r.u32("tensor length")? as usize;
        if n != t.len() {
            return Err(r.error(at, format!("tensor of {n} values, expected {}", t.len())));
        }
        for v in t.iter_mut() {
            let at = r.pos();
            *v = r.f64("parameter")?;
            if !v.is_finite() {
                return Err(r.error(at, "non-finite parameter"));
            }
        }
    }
    r.finish()?;
    Ok(Checkpoint {
        params,
        source_tag,
        scope,
    })
}
