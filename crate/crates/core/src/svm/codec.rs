//! Versioned binary model encoding.
//!
//! Layout (little endian): magic `SSVM`, u16 version, u64 dim, dim x f64 w,
//! f64 b, f64 C, f64 kkt_tol, u8 + u64 max_passes, u64 seed,
//! u64 dictionary fingerprint, u64 n, n x (u32 id length, id bytes,
//! u8 label, f64 alpha), then a u64 FNV-1a checksum over everything before it.
//! Floats are stored as raw bits so a round trip is bit-exact.

use alloc::string::String;
use alloc::vec::Vec;

use super::{DualCoef, SvmModel, TrainConfig};
use crate::fingerprint::{self, Fingerprint};
use crate::Label;

pub const MODEL_FORMAT_VERSION: u16 = 1;
const MAGIC: &[u8; 4] = b"SSVM";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model format version {0} (expected {MODEL_FORMAT_VERSION})")]
    Version(u16),
    #[error("corrupt model payload: {0}")]
    Corrupt(&'static str),
}

pub fn serialize_model(model: &SvmModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 8 * model.w.len() + 24 * model.alphas.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    put_u64(&mut out, model.w.len() as u64);
    for &x in &model.w {
        put_f64(&mut out, x);
    }
    put_f64(&mut out, model.b);
    put_f64(&mut out, model.config.c);
    put_f64(&mut out, model.config.kkt_tol);
    out.push(model.config.max_passes.is_some() as u8);
    put_u64(&mut out, model.config.max_passes.unwrap_or(0));
    put_u64(&mut out, model.config.seed);
    put_u64(&mut out, model.dictionary_fingerprint.0);
    put_u64(&mut out, model.alphas.len() as u64);
    for a in &model.alphas {
        out.extend_from_slice(&(a.id.len() as u32).to_le_bytes());
        out.extend_from_slice(a.id.as_bytes());
        out.push(match a.y {
            Label::Spam => 0,
            Label::Nonspam => 1,
        });
        put_f64(&mut out, a.alpha);
    }
    let sum = fingerprint::of_bytes(&out).0;
    put_u64(&mut out, sum);
    out
}

pub fn deserialize_model(bytes: &[u8]) -> Result<SvmModel, CodecError> {
    if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
        return Err(CodecError::BadMagic);
    }
    let mut r = Reader { buf: bytes, pos: 4 };
    let version = u16::from_le_bytes(r.take::<2>()?);
    if version != MODEL_FORMAT_VERSION {
        return Err(CodecError::Version(version));
    }
    if bytes.len() < 8 + r.pos {
        return Err(CodecError::Corrupt("truncated"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
    // body is only trusted once the checksum matches; a short read below
    // still reports truncation first
    let dim = r.u64()? as usize;
    if dim > bytes.len() / 8 {
        return Err(CodecError::Corrupt("dimension exceeds payload"));
    }
    let mut w = Vec::with_capacity(dim);
    for _ in 0..dim {
        w.push(r.f64()?);
    }
    let b = r.f64()?;
    let c = r.f64()?;
    let kkt_tol = r.f64()?;
    let has_passes = r.u8()?;
    let passes = r.u64()?;
    let max_passes = match has_passes {
        0 => None,
        1 => Some(passes),
        _ => return Err(CodecError::Corrupt("bad max_passes flag")),
    };
    let seed = r.u64()?;
    let fp = Fingerprint(r.u64()?);
    let n = r.u64()? as usize;
    if n > bytes.len() {
        return Err(CodecError::Corrupt("example count exceeds payload"));
    }
    let mut alphas = Vec::with_capacity(n);
    for _ in 0..n {
        let len = u32::from_le_bytes(r.take::<4>()?) as usize;
        let id = String::from_utf8(r.slice(len)?.to_vec()).map_err(|_| CodecError::Corrupt("id is not UTF-8"))?;
        let y = match r.u8()? {
            0 => Label::Spam,
            1 => Label::Nonspam,
            _ => return Err(CodecError::Corrupt("bad label byte")),
        };
        let alpha = r.f64()?;
        alphas.push(DualCoef { id, y, alpha });
    }
    if r.pos != body.len() {
        return Err(CodecError::Corrupt("trailing bytes"));
    }
    if fingerprint::of_bytes(body).0 != stored {
        return Err(CodecError::Corrupt("checksum mismatch"));
    }
    let config = TrainConfig {
        c,
        kkt_tol,
        max_passes,
        seed,
    };
    Ok(SvmModel::from_parts(w, b, alphas, fp, config))
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    put_u64(out, v.to_bits());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn slice(&mut self, len: usize) -> Result<&'a [u8], CodecError> {
        let end = self.pos.checked_add(len).ok_or(CodecError::Corrupt("truncated"))?;
        // the last 8 bytes are the checksum
        if end + 8 > self.buf.len() {
            return Err(CodecError::Corrupt("truncated"));
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        Ok(self.slice(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take::<1>()?[0])
    }

    fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_le_bytes(self.take::<8>()?))
    }

    fn f64(&mut self) -> Result<f64, CodecError> {
        Ok(f64::from_bits(self.u64()?))
    }
}
