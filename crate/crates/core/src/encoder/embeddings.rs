//! Precomputed token vectors: `"EMB1"`, u32 token count, u32 dim, then
//! row-major little-endian f32 values.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numeric::{Matrix, Real};

pub const MAGIC: &[u8; 4] = b"EMB1";

pub fn parse_embeddings(bytes: &[u8]) -> std::result::Result<Matrix, String> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err("missing EMB1 header".into());
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() != count * dim * 4 {
        return Err(format!("expected {} bytes of vectors for {count}x{dim}, found {}", count * dim * 4, body.len()));
    }
    let data = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as Real).collect();
    Ok(Matrix::from_vec(count, dim, data))
}

pub fn read_embeddings(path: &Path) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&bytes).map_err(|m| Error::format(path, m))
}

pub fn encode_embeddings(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + m.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for &v in m.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn write_embeddings(path: &Path, m: &Matrix) -> Result<()> {
    fs::write(path, encode_embeddings(m)).map_err(|e| Error::io(path, e))
}
