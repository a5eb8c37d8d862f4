use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{DType, Real, Tensor};

use super::{read_bytes, write_bytes};

pub const MAGIC: &[u8; 4] = b"REO1";
pub const VERSION: u8 = 1;

/// A decoded blob of any supported element type.
#[derive(Debug, Clone, PartialEq)]
pub enum Blob {
    F32(Tensor<f32>),
    F64(Tensor<f64>),
    U8 { dims: Vec<usize>, values: Vec<u8> },
}

impl Blob {
    pub fn dtype(&self) -> DType {
        match self {
            Blob::F32(_) => DType::F32,
            Blob::F64(_) => DType::F64,
            Blob::U8 { .. } => DType::U8,
        }
    }

    pub fn dims(&self) -> &[usize] {
        match self {
            Blob::F32(t) => t.dims(),
            Blob::F64(t) => t.dims(),
            Blob::U8 { dims, .. } => dims,
        }
    }
}

fn header(dtype: DType, dims: &[usize], out: &mut Vec<u8>) -> Result<()> {
    if dims.len() > u8::MAX as usize {
        return Err(Error::Precondition(format!("{} dimensions do not fit a blob header", dims.len())));
    }
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(dtype.code());
    out.push(dims.len() as u8);
    for &d in dims {
        let d = u32::try_from(d).map_err(|_| Error::Precondition(format!("extent {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    Ok(())
}

/// Serializes a tensor to blob bytes.
pub fn encode_blob<F: Real>(tensor: &Tensor<F>) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(7 + 4 * tensor.ndim() + tensor.len() * F::DTYPE.size());
    header(F::DTYPE, tensor.dims(), &mut out)?;
    for &v in tensor.values() {
        v.write_le(&mut out);
    }
    Ok(out)
}

pub fn write_blob<F: Real>(tensor: &Tensor<F>, path: &Path) -> Result<()> {
    write_bytes(path, &encode_blob(tensor)?)
}

pub fn write_u8_blob(dims: &[usize], values: &[u8], path: &Path) -> Result<()> {
    let expected: usize = dims.iter().product();
    if expected != values.len() {
        return Err(Error::Dimension(format!("{} bytes for dims {dims:?}", values.len())));
    }
    let mut out = Vec::with_capacity(7 + 4 * dims.len() + values.len());
    header(DType::U8, dims, &mut out)?;
    out.extend_from_slice(values);
    write_bytes(path, &out)
}

/// Offset where the payload begins; the caller's checksum covers the rest.
pub fn payload_offset(bytes: &[u8]) -> Option<usize> {
    bytes.get(6).map(|&n| 7 + 4 * n as usize)
}

/// Parses blob bytes; `path` only labels errors.
pub fn decode_blob(bytes: &[u8], path: &Path) -> Result<Blob> {
    let bad = |m: String| Error::format(path, m);
    if bytes.len() < 7 {
        return Err(bad(format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("bad magic".into()));
    }
    if bytes[4] != VERSION {
        return Err(bad(format!("unsupported version {}", bytes[4])));
    }
    let dtype = DType::from_code(bytes[5]).ok_or_else(|| bad(format!("unknown dtype code {}", bytes[5])))?;
    let ndim = bytes[6] as usize;
    let start = 7 + 4 * ndim;
    if bytes.len() < start {
        return Err(bad("truncated dimension list".into()));
    }
    let dims: Vec<usize> = bytes[7..start]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    if dims.contains(&0) {
        return Err(bad(format!("zero extent in {dims:?}")));
    }
    let count: usize = dims.iter().product();
    let payload = &bytes[start..];
    let expected = count * dtype.size();
    if payload.len() < expected {
        return Err(bad(format!(
            "truncated payload: header claims {count} elements ({expected} bytes), found {} bytes",
            payload.len()
        )));
    }
    if payload.len() > expected {
        return Err(bad(format!("{} trailing bytes after payload", payload.len() - expected)));
    }
    fn values<F: Real>(payload: &[u8]) -> Vec<F> {
        payload.chunks_exact(F::DTYPE.size()).map(F::read_le).collect()
    }
    Ok(match dtype {
        DType::F32 => Blob::F32(Tensor::new(dims, values::<f32>(payload))?),
        DType::F64 => Blob::F64(Tensor::new(dims, values::<f64>(payload))?),
        DType::U8 => Blob::U8 { dims, values: payload.to_vec() },
    })
}

pub fn read_blob(path: &Path) -> Result<Blob> {
    decode_blob(&read_bytes(path)?, path)
}

/// Reads a floating blob, requiring its stored dtype to be `F`.
pub fn read_blob_as<F: Real>(path: &Path) -> Result<Tensor<F>> {
    let blob = read_blob(path)?;
    match (&blob, F::DTYPE) {
        (Blob::F32(t), DType::F32) => Ok(t.cast()),
        (Blob::F64(t), DType::F64) => Ok(t.cast()),
        _ => Err(Error::format(
            path,
            format!("dtype mismatch: stored {:?}, requested {:?}", blob.dtype(), F::DTYPE),
        )),
    }
}
