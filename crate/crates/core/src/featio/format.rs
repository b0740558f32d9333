//! Little-endian binary formats.
//!
//! Feature file (`.aaif`):
//! ```text
//! "AAIF" | version u32 = 1 | n_frames u32 | dim u32 | frame_rate_hz f32
//!        | tag_len u16 | tag (UTF-8) | n_frames*dim f32, row-major
//! ```
//! Embedding file (`.aaix`):
//! ```text
//! "AAIX" | version u32 = 1 | dim u32 | id_len u16 | subject_id (UTF-8) | dim f32
//! ```
//! Values are held as `f64` in memory and stored as `f32`.

use std::path::Path;

use ndarray::Array2;

use super::{FeatureSequence, SpeakerEmbedding};
use crate::error::{AaiError, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"AAIF";
pub const EMBEDDING_MAGIC: &[u8; 4] = b"AAIX";
pub const FORMAT_VERSION: u32 = 1;

pub(crate) struct ByteReader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(path: &'a Path, bytes: &'a [u8]) -> Self {
        ByteReader { path, bytes, pos: 0 }
    }

    pub(crate) fn pos(&self) -> usize {
        self.pos
    }

    pub(crate) fn error(&self, offset: usize, msg: impl Into<String>) -> AaiError {
        AaiError::Format {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            msg: msg.into(),
        }
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.error(
                self.pos,
                format!(
                    "truncated {what}: need {n} bytes, {} remain",
                    self.bytes.len() - self.pos
                ),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let m = self.take(4, "magic")?;
        if m != expected {
            return Err(self.error(0, "bad magic"));
        }
        Ok(())
    }

    pub(crate) fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub(crate) fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u16(what)? as usize;
        let at = self.pos;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| self.error(at, format!("{what} is not UTF-8")))
    }

    pub(crate) fn version(&mut self) -> Result<()> {
        let at = self.pos;
        let v = self.u32("version")?;
        if v != FORMAT_VERSION {
            return Err(self.error(at, format!("unsupported version {v}")));
        }
        Ok(())
    }

    /// Reads `n` f32 values, rejecting NaN/inf with the offending offset.
    fn finite_f32s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let need = n.checked_mul(4).ok_or_else(|| self.error(self.pos, "size overflow"))?;
        if self.bytes.len() - self.pos < need {
            let have = (self.bytes.len() - self.pos) / 4;
            return Err(self.error(
                self.pos,
                format!("truncated {what}: declared {n} values but only {have} present"),
            ));
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let at = self.pos;
            let v = self.f32(what)?;
            if !v.is_finite() {
                return Err(self.error(at, format!("non-finite value {v} in {what}")));
            }
            out.push(v as f64);
        }
        Ok(out)
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.error(
                self.pos,
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

pub(crate) fn put_str(buf: &mut Vec<u8>, s: &str) -> Result<()> {
    let len = u16::try_from(s.len())
        .map_err(|_| AaiError::invalid(format!("string of {} bytes too long", s.len())))?;
    buf.extend_from_slice(&len.to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
    Ok(())
}

fn dim_u32(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| AaiError::invalid(format!("{what} {n} exceeds u32")))
}

fn put_finite_f32(buf: &mut Vec<u8>, v: f64) -> Result<()> {
    let f = v as f32;
    if !f.is_finite() {
        return Err(AaiError::invalid(format!("value {v} is not representable as finite f32")));
    }
    buf.extend_from_slice(&f.to_le_bytes());
    Ok(())
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| AaiError::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| AaiError::io(parent, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| AaiError::io(path, e))
}

pub fn write_feature_file(path: impl AsRef<Path>, seq: &FeatureSequence) -> Result<()> {
    let mut buf = Vec::with_capacity(32 + seq.n_frames() * seq.dim() * 4);
    buf.extend_from_slice(FEATURE_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&dim_u32(seq.n_frames(), "frame count")?.to_le_bytes());
    buf.extend_from_slice(&dim_u32(seq.dim(), "dimension")?.to_le_bytes());
    put_finite_f32(&mut buf, seq.frame_rate_hz())?;
    put_str(&mut buf, seq.source_tag())?;
    for v in seq.frames().iter() {
        put_finite_f32(&mut buf, *v)?;
    }
    write_bytes(path.as_ref(), &buf)
}

pub fn read_feature_file(path: impl AsRef<Path>) -> Result<FeatureSequence> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let mut r = ByteReader::new(path, &bytes);
    r.magic(FEATURE_MAGIC)?;
    r.version()?;
    let n_frames = r.u32("frame count")? as usize;
    let dim = r.u32("dimension")? as usize;
    let rate_at = r.pos;
    let rate = r.f32("frame rate")?;
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(r.error(rate_at, format!("frame rate {rate} is not positive")));
    }
    let tag = r.string("source tag")?;
    if n_frames == 0 || dim == 0 {
        return Err(r.error(8, format!("empty feature matrix {n_frames}x{dim}")));
    }
    let total = n_frames
        .checked_mul(dim)
        .ok_or_else(|| r.error(8, "frame count overflow"))?;
    let values = r.finite_f32s(total, "payload")?;
    r.finish()?;
    let frames = Array2::from_shape_vec((n_frames, dim), values).expect("shape checked above");
    FeatureSequence::new(frames, rate as f64, tag)
}

pub fn write_embedding_file(path: impl AsRef<Path>, emb: &SpeakerEmbedding) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + emb.dim() * 4);
    buf.extend_from_slice(EMBEDDING_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&dim_u32(emb.dim(), "dimension")?.to_le_bytes());
    put_str(&mut buf, &emb.subject_id)?;
    for v in &emb.values {
        put_finite_f32(&mut buf, *v)?;
    }
    write_bytes(path.as_ref(), &buf)
}

pub fn read_embedding_file(path: impl AsRef<Path>) -> Result<SpeakerEmbedding> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let mut r = ByteReader::new(path, &bytes);
    r.magic(EMBEDDING_MAGIC)?;
    r.version()?;
    let dim = r.u32("dimension")? as usize;
    let subject = r.string("subject id")?;
    if dim == 0 {
        return Err(r.error(8, "empty embedding"));
    }
    let values = r.finite_f32s(dim, "embedding")?;
    r.finish()?;
    SpeakerEmbedding::new(values, subject)
}
