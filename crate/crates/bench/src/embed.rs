//! EMBED1: `"EMBED1"`, `u8` version 1, `u32` rows, `u32` dim, rows × dim
//! `f32`, rows `i32` labels, then an optional `u32`-length-prefixed JSON
//! metadata blob. All integers and floats little-endian.

use qattr_core::theta::EmbeddingPool;
use std::fs;
use std::io::Write;
use std::path::Path;

pub const MAGIC: &[u8; 6] = b"EMBED1";
pub const VERSION: u8 = 1;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("byte {offset}: {msg}")]
    Format { offset: usize, msg: String },
}

fn format_err<T>(offset: usize, msg: impl Into<String>) -> Result<T, LoadError> {
    Err(LoadError::Format { offset, msg: msg.into() })
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], LoadError> {
        match self.pos.checked_add(n) {
            Some(end) if end <= self.buf.len() => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            _ => format_err(self.pos, format!("truncated while reading {what}")),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32, LoadError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Parsed file: the pool plus its metadata blob, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub pool: EmbeddingPool,
    pub metadata: Option<serde_json::Value>,
}

pub fn parse_embeddings(name: &str, buf: &[u8]) -> Result<EmbeddingFile, LoadError> {
    let mut c = Cursor { buf, pos: 0 };
    if c.take(6, "magic")? != MAGIC {
        return format_err(0, "bad magic");
    }
    let version = c.take(1, "version")?[0];
    if version != VERSION {
        return format_err(6, format!("unsupported version {version}"));
    }
    let rows = c.u32("row count")? as usize;
    let dim = c.u32("dim")? as usize;
    if dim == 0 {
        return format_err(11, "dim must be positive");
    }
    let body_start = c.pos;
    let floats = c.take(rows.checked_mul(dim).and_then(|n| n.checked_mul(4)).unwrap_or(usize::MAX), "vectors")?;
    let mut vectors = Vec::with_capacity(rows * dim);
    for (i, chunk) in floats.chunks_exact(4).enumerate() {
        let x = f32::from_le_bytes(chunk.try_into().unwrap());
        if !x.is_finite() {
            return format_err(body_start + 4 * i, format!("non-finite value in row {}", i / dim));
        }
        vectors.push(x);
    }
    let labels_start = c.pos;
    let raw_labels = c.take(rows * 4, "labels")?;
    let mut labels = Vec::with_capacity(rows);
    for (i, chunk) in raw_labels.chunks_exact(4).enumerate() {
        let l = i32::from_le_bytes(chunk.try_into().unwrap());
        if l < 0 {
            return format_err(labels_start + 4 * i, format!("negative label {l}"));
        }
        labels.push(l as usize);
    }
    let metadata = if c.pos == buf.len() {
        None
    } else {
        let at = c.pos;
        let len = c.u32("metadata length")? as usize;
        let blob = c.take(len, "metadata")?;
        if c.pos != buf.len() {
            return format_err(c.pos, "trailing bytes after metadata");
        }
        Some(serde_json::from_slice(blob).or_else(|e| format_err(at + 4, format!("metadata is not JSON: {e}")))?)
    };
    for (r, row) in vectors.chunks(dim).enumerate() {
        if row.iter().all(|&x| x == 0.0) {
            return format_err(body_start + 4 * r * dim, format!("row {r} has zero norm"));
        }
    }
    let pool = EmbeddingPool::new(name, dim, vectors, labels).or_else(|e| format_err(body_start, e.to_string()))?;
    Ok(EmbeddingFile { pool, metadata })
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingFile, LoadError> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|source| LoadError::Io { path: path.display().to_string(), source })?;
    let name = path.file_stem().map_or_else(|| "embeddings".into(), |s| s.to_string_lossy().into_owned());
    parse_embeddings(&name, &buf)
}

pub fn encode_embeddings(pool: &EmbeddingPool, metadata: Option<&serde_json::Value>) -> Vec<u8> {
    let mut out = Vec::with_capacity(15 + 4 * (pool.vectors().len() + pool.len()));
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(pool.len() as u32).to_le_bytes());
    out.extend_from_slice(&(pool.dim() as u32).to_le_bytes());
    for x in pool.vectors() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for &l in pool.labels() {
        out.extend_from_slice(&(l as i32).to_le_bytes());
    }
    if let Some(m) = metadata {
        let blob = serde_json::to_vec(m).expect("JSON values always serialize");
        out.extend_from_slice(&(blob.len() as u32).to_le_bytes());
        out.extend_from_slice(&blob);
    }
    out
}

pub fn write_embeddings(path: impl AsRef<Path>, pool: &EmbeddingPool, metadata: Option<&serde_json::Value>) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_embeddings(pool, metadata))?;
    f.sync_all()
}
