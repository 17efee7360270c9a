//! Encoder checkpoint: magic `ALNENC1\0`, u32 kind, u32 V, u32 d, V vocab
//! entries (u32 byte length + UTF-8), then embed, Wq, Wk, Wv as row-major
//! f32. All integers and floats little-endian.

use std::fs;
use std::path::Path;

use super::params::{Attention, EncoderKind, EncoderParams, Vocab};
use crate::error::{AlignError, Result};
use crate::matrix::Matrix;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ALNENC1\0";

pub fn encode_checkpoint(params: &EncoderParams) -> Vec<u8> {
    let mut out = CHECKPOINT_MAGIC.to_vec();
    let put = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    put(&mut out, params.kind.code() as usize);
    put(&mut out, params.vocab.len());
    put(&mut out, params.dim());
    for t in params.vocab.tokens() {
        put(&mut out, t.len());
        out.extend_from_slice(t.as_bytes());
    }
    for tensor in params.tensors() {
        for &x in tensor.as_slice() {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Cursor<'_> {
    fn err(&self, message: impl Into<String>) -> AlignError {
        AlignError::Format {
            path: self.path.to_path_buf(),
            record: 0,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.err(format!("truncated checkpoint while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()) as usize)
    }

    fn matrix(&mut self, rows: usize, cols: usize, what: &str) -> Result<Matrix> {
        let raw = self.take(rows * cols * 4, what)?;
        let data: Vec<f64> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(self.err(format!("non-finite value in {what}")));
        }
        Matrix::from_vec(rows, cols, data)
    }
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<EncoderParams> {
    let mut c = Cursor { bytes, pos: 0, path };
    if c.take(8, "magic")? != CHECKPOINT_MAGIC {
        return Err(c.err("bad magic, not an encoder checkpoint"));
    }
    let kind = EncoderKind::from_code(c.u32("kind")? as u32)?;
    let v = c.u32("vocab size")?;
    let d = c.u32("dim")?;
    let mut tokens = Vec::with_capacity(v);
    for _ in 0..v {
        let len = c.u32("vocab entry length")?;
        let tok = std::str::from_utf8(c.take(len, "vocab entry")?).map(str::to_string);
        tokens.push(tok.map_err(|_| c.err("vocab entry is not UTF-8"))?);
    }
    let vocab = Vocab::from_tokens(tokens)?;
    let embed = c.matrix(v, d, "embedding table")?;
    let attention = match kind {
        EncoderKind::Static => None,
        EncoderKind::Attn1 => Some(Attention {
            wq: c.matrix(d, d, "Wq")?,
            wk: c.matrix(d, d, "Wk")?,
            wv: c.matrix(d, d, "Wv")?,
        }),
    };
    if c.pos != bytes.len() {
        return Err(c.err(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    EncoderParams::new(vocab, embed, attention)
}

pub fn write_checkpoint(params: &EncoderParams, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(params)).map_err(|e| AlignError::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<EncoderParams> {
    let bytes = fs::read(path).map_err(|e| AlignError::io(path, e))?;
    decode_checkpoint(&bytes, path)
}

/// Rounds every parameter to f32, i.e. the state a checkpoint round trip yields.
pub fn round_to_storage(params: &EncoderParams) -> EncoderParams {
    let mut p = params.clone();
    for t in p.tensors_mut() {
        t.as_mut_slice().iter_mut().for_each(|x| *x = *x as f32 as f64);
    }
    p
}
