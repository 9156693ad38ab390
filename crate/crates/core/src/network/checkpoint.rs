//! Binary checkpoint format.
//!
//! ```text
//! magic      8 bytes  "SGCKPT01"
//! header_len u32 LE
//! header     JSON (shape, seed, config hash, tensor table)
//! tensors    f64 LE, row-major, in header order
//! ```

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::params::{NetworkParams, NetworkShape, TENSOR_NAMES};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SGCKPT01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub shape: NetworkShape,
    pub seed: u64,
    pub config_sha256: String,
    pub tensors: Vec<TensorInfo>,
}

pub(crate) fn write_matrix_rows(out: &mut Vec<u8>, m: &DMatrix<f64>) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
}

pub(crate) fn read_matrix_rows(bytes: &[u8], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| {
        let o = 8 * (i * cols + j);
        f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"))
    })
}

/// Writes `magic | u32 header length | JSON header | payload`.
pub(crate) fn write_framed(path: &Path, magic: &[u8; 8], header: &impl Serialize, payload: &[u8]) -> Result<()> {
    let json = serde_json::to_vec(header).map_err(|e| Error::io(path, e.into()))?;
    let len = u32::try_from(json.len()).map_err(|_| Error::Config("header too large".into()))?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(magic)
        .and_then(|_| f.write_all(&len.to_le_bytes()))
        .and_then(|_| f.write_all(&json))
        .and_then(|_| f.write_all(payload))
        .map_err(|e| Error::io(path, e))
}

/// Inverse of [`write_framed`]; returns the header and the payload bytes.
pub(crate) fn read_framed<H: for<'de> Deserialize<'de>>(path: &Path, magic: &[u8; 8]) -> Result<(H, Vec<u8>)> {
    let origin = path.display().to_string();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[..8] != magic {
        return Err(Error::parse(&origin, 0, "bad magic"));
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let end = 12 + len;
    if bytes.len() < end {
        return Err(Error::parse(&origin, 0, "truncated header"));
    }
    let header = serde_json::from_slice(&bytes[12..end]).map_err(|e| Error::parse(&origin, 0, e.to_string()))?;
    Ok((header, bytes.split_off(end)))
}

/// Row-major bytes of a column-major `rows × cols` slice.
fn write_slice_rows(out: &mut Vec<u8>, data: &[f64], rows: usize, cols: usize) {
    for i in 0..rows {
        for j in 0..cols {
            out.extend_from_slice(&data[j * rows + i].to_le_bytes());
        }
    }
}

pub fn write_checkpoint(path: impl AsRef<Path>, params: &NetworkParams, seed: u64, config_sha256: &str) -> Result<()> {
    let header = CheckpointHeader {
        shape: params.shape(),
        seed,
        config_sha256: config_sha256.to_string(),
        tensors: TENSOR_NAMES
            .iter()
            .zip(params.dims())
            .map(|(n, (rows, cols))| TensorInfo {
                name: n.to_string(),
                rows,
                cols,
            })
            .collect(),
    };
    let mut payload = Vec::with_capacity(8 * params.len());
    for (data, (rows, cols)) in params.slices().into_iter().zip(params.dims()) {
        write_slice_rows(&mut payload, data, rows, cols);
    }
    write_framed(path.as_ref(), CHECKPOINT_MAGIC, &header, &payload)
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<(NetworkParams, CheckpointHeader)> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    let (header, payload): (CheckpointHeader, _) = read_framed(path, CHECKPOINT_MAGIC)?;
    header.shape.validate()?;
    let mut params = NetworkParams::zeros(header.shape);
    let names: Vec<_> = header.tensors.iter().map(|t| t.name.as_str()).collect();
    if names != TENSOR_NAMES {
        return Err(Error::parse(&origin, 0, format!("unexpected tensor table {names:?}")));
    }
    let expected: usize = header.tensors.iter().map(|t| 8 * t.rows * t.cols).sum();
    if payload.len() != expected {
        return Err(Error::parse(
            &origin,
            0,
            format!("payload has {} bytes, header implies {expected}", payload.len()),
        ));
    }
    let mut offset = 0;
    let dims = params.dims();
    for ((slot, info), dim) in params.slices_mut().into_iter().zip(&header.tensors).zip(dims) {
        if dim != (info.rows, info.cols) {
            return Err(Error::Shape(format!(
                "{} is {}x{}, shape implies {dim:?}",
                info.name, info.rows, info.cols
            )));
        }
        let n = 8 * info.rows * info.cols;
        let m = read_matrix_rows(&payload[offset..offset + n], info.rows, info.cols);
        slot.copy_from_slice(m.as_slice());
        offset += n;
    }
    if !params.is_finite() {
        return Err(Error::Numeric("checkpoint contains non-finite weights".into()));
    }
    Ok((params, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn round_trip_bit_exact() {
        let shape = NetworkShape {
            inputs: 4,
            gestalt: 3,
            hidden: 2,
            outputs: 5,
        };
        let p = NetworkParams::init(shape, &mut seeded(1));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        write_checkpoint(&path, &p, 42, "abc").unwrap();
        let (q, h) = read_checkpoint(&path).unwrap();
        assert_eq!(p, q);
        assert_eq!(h.seed, 42);
        assert_eq!(h.config_sha256, "abc");
    }

    #[test]
    fn row_major_layout() {
        let shape = NetworkShape {
            inputs: 2,
            gestalt: 1,
            hidden: 1,
            outputs: 1,
        };
        let mut p = NetworkParams::zeros(shape);
        p.w_in[(0, 0)] = 1.0;
        p.w_in[(0, 1)] = 2.0;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        write_checkpoint(&path, &p, 0, "").unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = &bytes[12 + len..];
        assert_eq!(f64::from_le_bytes(body[0..8].try_into().unwrap()), 1.0);
        assert_eq!(f64::from_le_bytes(body[8..16].try_into().unwrap()), 2.0);
    }

    #[test]
    fn corrupt_files_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"NOTACKPT").unwrap();
        assert!(matches!(read_checkpoint(&path), Err(Error::Parse { .. })));
        let p = NetworkParams::zeros(NetworkShape {
            inputs: 2,
            gestalt: 2,
            hidden: 2,
            outputs: 2,
        });
        write_checkpoint(&path, &p, 0, "").unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(read_checkpoint(&path), Err(Error::Parse { .. })));
    }
}
