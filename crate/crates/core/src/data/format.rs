//! Native tensor files.
//!
//! Layout, all integers little-endian: the magic `DSNT`, a `u16` version
//! (currently 1), a `u8` dtype code (0 = float32, 1 = float64), a `u8` rank,
//! `rank` dimensions as `u64`, then the row-major payload.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{DType, Scalar, Tensor};

pub const MAGIC: &[u8; 4] = b"DSNT";
pub const VERSION: u16 = 1;
const FIXED_HEADER: usize = 8;

/// A tensor whose element type is only known after reading it.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyTensor {
    F32(Tensor<f32>),
    F64(Tensor<f64>),
}

impl AnyTensor {
    pub fn dtype(&self) -> DType {
        match self {
            AnyTensor::F32(_) => DType::F32,
            AnyTensor::F64(_) => DType::F64,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            AnyTensor::F32(t) => t.shape(),
            AnyTensor::F64(t) => t.shape(),
        }
    }

    /// Convert to `T`, rounding if the stored precision is higher.
    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        match self {
            AnyTensor::F32(t) => t.cast(),
            AnyTensor::F64(t) => t.cast(),
        }
    }
}

pub fn encode<T: Scalar>(tensor: &Tensor<T>) -> Vec<u8> {
    let shape = tensor.shape();
    let mut out = Vec::with_capacity(FIXED_HEADER + 8 * shape.len() + tensor.len() * T::DTYPE.size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(T::DTYPE.code());
    out.push(u8::try_from(shape.len()).expect("rank fits in a byte"));
    for &d in shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in tensor.data() {
        v.write_le(&mut out);
    }
    out
}

/// Parse a native tensor image; `origin` names the source in errors.
pub fn decode_any(bytes: &[u8], origin: &Path) -> Result<AnyTensor> {
    let bad = |msg: String| Error::format(origin, msg);
    if bytes.len() < FIXED_HEADER {
        return Err(bad(format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("bad magic, not a DSNT tensor file".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let dtype = DType::from_code(bytes[6]).ok_or_else(|| bad(format!("unknown dtype {}", bytes[6])))?;
    let rank = bytes[7] as usize;
    let dims_end = FIXED_HEADER + 8 * rank;
    if bytes.len() < dims_end {
        return Err(bad(format!("truncated header: {rank} dimensions declared")));
    }
    let mut shape = Vec::with_capacity(rank);
    let mut count: usize = 1;
    for chunk in bytes[FIXED_HEADER..dims_end].chunks_exact(8) {
        let d = u64::from_le_bytes(chunk.try_into().unwrap());
        let d = usize::try_from(d).map_err(|_| bad(format!("dimension {d} too large")))?;
        count = count
            .checked_mul(d)
            .ok_or_else(|| bad("element count overflows".into()))?;
        shape.push(d);
    }
    let payload = &bytes[dims_end..];
    let expected = count
        .checked_mul(dtype.size())
        .ok_or_else(|| bad("payload size overflows".into()))?;
    if payload.len() < expected {
        return Err(bad(format!(
            "truncated payload: expected {expected} bytes, found {}",
            payload.len()
        )));
    }
    if payload.len() > expected {
        return Err(bad(format!(
            "{} trailing bytes after payload",
            payload.len() - expected
        )));
    }
    Ok(match dtype {
        DType::F32 => AnyTensor::F32(from_payload(&shape, payload)?),
        DType::F64 => AnyTensor::F64(from_payload(&shape, payload)?),
    })
}

fn from_payload<T: Scalar>(shape: &[usize], payload: &[u8]) -> Result<Tensor<T>> {
    let data = payload.chunks_exact(T::DTYPE.size()).map(T::read_le).collect();
    Tensor::from_vec(shape, data)
}

/// Parse and require the stored dtype to be `T`.
pub fn decode<T: Scalar>(bytes: &[u8], origin: &Path) -> Result<Tensor<T>> {
    let any = decode_any(bytes, origin)?;
    if any.dtype() != T::DTYPE {
        return Err(Error::DTypeMismatch {
            expected: T::DTYPE.name(),
            found: any.dtype().name(),
        });
    }
    Ok(any.cast())
}

pub fn write_tensor<T: Scalar>(path: impl AsRef<Path>, tensor: &Tensor<T>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(tensor)).map_err(|e| Error::io(path, e))
}

pub fn read_any(path: impl AsRef<Path>) -> Result<AnyTensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_any(&bytes, path)
}

/// Read a tensor stored with exactly the dtype `T`.
pub fn read_tensor<T: Scalar>(path: impl AsRef<Path>) -> Result<Tensor<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_fixed() {
        let t = Tensor::<f64>::from_vec(&[2], vec![1.0, -2.0]).unwrap();
        let b = encode(&t);
        assert_eq!(&b[..4], b"DSNT");
        assert_eq!(&b[4..8], &[1, 0, 1, 1]);
        assert_eq!(&b[8..16], &2u64.to_le_bytes());
        assert_eq!(&b[16..24], &1.0f64.to_le_bytes());
        assert_eq!(b.len(), 32);
    }

    #[test]
    fn scalar_rank_zero_round_trips() {
        let t = Tensor::<f32>::from_vec(&[], vec![3.5]).unwrap();
        assert_eq!(decode::<f32>(&encode(&t), Path::new("x")).unwrap(), t);
    }

    #[test]
    fn strict_read_rejects_other_dtype() {
        let b = encode(&Tensor::<f32>::zeros(&[1]));
        assert!(matches!(decode::<f64>(&b, Path::new("x")), Err(Error::DTypeMismatch { .. })));
    }
}
