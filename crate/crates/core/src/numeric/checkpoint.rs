//! Binary checkpoint format.
//!
//! Layout (all integers little-endian u32):
//!
//! ```text
//! "DGA1" | version | parameter count
//! per parameter: name length | UTF-8 name | rows | cols | rows*cols f64 LE
//! ```

use std::io::{self, Read, Write};

use super::{Matrix, ModelParams, Real};

pub const MAGIC: &[u8; 4] = b"DGA1";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("parameter name is not valid UTF-8")]
    BadName,
    #[error("checkpoint has {found} parameters, model expects {expected}")]
    Count { expected: usize, found: usize },
    #[error("parameter {index} is named {found:?}, model expects {expected:?}")]
    Name { index: usize, expected: String, found: String },
    #[error("parameter {name} is {found_rows}x{found_cols}, model expects {rows}x{cols}")]
    Shape { name: String, rows: usize, cols: usize, found_rows: usize, found_cols: usize },
}

/// One named tensor as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

pub fn write_checkpoint<W: Write>(params: &ModelParams, mut w: W) -> Result<(), CheckpointError> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for p in params.iter() {
        let name = p.name.as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&(p.value.rows() as u32).to_le_bytes())?;
        w.write_all(&(p.value.cols() as u32).to_le_bytes())?;
        for &v in p.value.as_slice() {
            w.write_all(&(v as f64).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_tensors<R: Read>(mut r: R) -> Result<Vec<StoredTensor>, CheckpointError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic(magic));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let count = read_u32(&mut r)? as usize;
    let mut out = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| CheckpointError::BadName)?;
        let rows = read_u32(&mut r)? as usize;
        let cols = read_u32(&mut r)? as usize;
        let mut values = Vec::with_capacity((rows * cols).min(1 << 24));
        let mut b = [0u8; 8];
        for _ in 0..rows * cols {
            r.read_exact(&mut b)?;
            values.push(f64::from_le_bytes(b));
        }
        out.push(StoredTensor { name, rows, cols, values });
    }
    Ok(out)
}

/// Loads stored tensors into an existing registry, checking names and shapes.
pub fn load_into<R: Read>(params: &mut ModelParams, r: R) -> Result<(), CheckpointError> {
    let tensors = read_tensors(r)?;
    if tensors.len() != params.len() {
        return Err(CheckpointError::Count { expected: params.len(), found: tensors.len() });
    }
    for (index, (p, t)) in params.iter().zip(&tensors).enumerate() {
        if p.name != t.name {
            return Err(CheckpointError::Name { index, expected: p.name.clone(), found: t.name.clone() });
        }
        if p.value.shape() != (t.rows, t.cols) {
            return Err(CheckpointError::Shape {
                name: t.name.clone(),
                rows: p.value.rows(),
                cols: p.value.cols(),
                found_rows: t.rows,
                found_cols: t.cols,
            });
        }
    }
    for (p, t) in params.iter_mut().zip(tensors) {
        let values = t.values.into_iter().map(|v| v as Real).collect();
        p.value = Matrix::from_vec(t.rows, t.cols, values);
    }
    Ok(())
}
