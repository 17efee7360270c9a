//! Binary embedding records.
//!
//! Layout (all little-endian): magic `ALNEMB1\0`, `u32` dim, then per record
//! `u32` source subword count, `u32` target subword count, the source rows and
//! then the target rows as row-major `f32`. Records run to end of file.

use std::fs;
use std::path::Path;

use crate::error::{AlignError, Result};
use crate::matrix::Matrix;

pub const EMBEDDING_MAGIC: &[u8; 8] = b"ALNEMB1\0";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub source: Matrix,
    pub target: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecordFile {
    pub dim: usize,
    pub records: Vec<EmbeddingRecord>,
}

impl EmbeddingRecordFile {
    pub fn new(dim: usize) -> Self {
        EmbeddingRecordFile {
            dim,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, source: Matrix, target: Matrix) -> Result<()> {
        if source.cols() != self.dim || target.cols() != self.dim {
            return Err(AlignError::Shape(format!(
                "record dims {}/{} do not match file dim {}",
                source.cols(),
                target.cols(),
                self.dim
            )));
        }
        self.records.push(EmbeddingRecord { source, target });
        Ok(())
    }
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| AlignError::validation(format!("{what} {v} does not fit in u32")))
}

pub fn encode_embeddings(file: &EmbeddingRecordFile) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(&to_u32(file.dim, "dim")?.to_le_bytes());
    for rec in &file.records {
        out.extend_from_slice(&to_u32(rec.source.rows(), "source count")?.to_le_bytes());
        out.extend_from_slice(&to_u32(rec.target.rows(), "target count")?.to_le_bytes());
        for &v in rec.source.as_slice().iter().chain(rec.target.as_slice()) {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_embeddings(file: &EmbeddingRecordFile, path: &Path) -> Result<()> {
    let bytes = encode_embeddings(file)?;
    fs::write(path, bytes).map_err(|e| AlignError::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Option<&[u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn at_end(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

pub fn decode_embeddings(bytes: &[u8], path: &Path) -> Result<EmbeddingRecordFile> {
    let fail = |record: usize, message: String| AlignError::Format {
        path: path.to_path_buf(),
        record,
        message,
    };
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8) != Some(&EMBEDDING_MAGIC[..]) {
        return Err(fail(0, "bad magic, expected ALNEMB1".into()));
    }
    let dim = r.u32().ok_or_else(|| fail(0, "truncated header".into()))? as usize;
    let mut file = EmbeddingRecordFile::new(dim);
    let read_matrix = |r: &mut Reader, rows: usize, k: usize| -> Result<Matrix> {
        let n = rows
            .checked_mul(dim)
            .ok_or_else(|| fail(k, "row count overflow".into()))?;
        let mut data = Vec::with_capacity(n);
        for idx in 0..n {
            let b = r.take(4).ok_or_else(|| {
                fail(k, format!("truncated record: expected {rows} rows of dim {dim}, got {} rows", idx / dim.max(1)))
            })?;
            let v = f32::from_le_bytes(b.try_into().unwrap());
            if !v.is_finite() {
                return Err(fail(k, format!("non-finite value at row {}, column {}", idx / dim, idx % dim)));
            }
            data.push(v as f64);
        }
        Matrix::from_vec(rows, dim, data)
    };
    let mut k = 0;
    while !r.at_end() {
        let header = (r.u32(), r.u32());
        let (Some(ns), Some(nt)) = header else {
            return Err(fail(k, "truncated record header".into()));
        };
        let source = read_matrix(&mut r, ns as usize, k)?;
        let target = read_matrix(&mut r, nt as usize, k)?;
        file.records.push(EmbeddingRecord { source, target });
        k += 1;
    }
    Ok(file)
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingRecordFile> {
    let bytes = fs::read(path).map_err(|e| AlignError::io(path, e))?;
    decode_embeddings(&bytes, path)
}
