//! Binary tensor container: `PEPH` magic, u32 LE version, u64 LE header
//! length, JSON header, little-endian f64 payload.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{ContainerError, Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"PEPH";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub dtype: String,
    pub shape: Vec<usize>,
    pub offset: u64,
    pub nbytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    tensors: Vec<TensorEntry>,
    payload_bytes: u64,
    meta: Value,
}

pub fn encode_container(meta: &Value, tensors: &[(String, Tensor)]) -> Result<Vec<u8>> {
    let mut entries = Vec::with_capacity(tensors.len());
    let mut offset = 0u64;
    for (name, t) in tensors {
        let nbytes = (t.len() * 8) as u64;
        entries.push(TensorEntry {
            name: name.clone(),
            dtype: "f64".into(),
            shape: t.shape().to_vec(),
            offset,
            nbytes,
        });
        offset += nbytes;
    }
    let header = serde_json::to_vec(&Header {
        tensors: entries,
        payload_bytes: offset,
        meta: meta.clone(),
    })?;
    let mut out = Vec::with_capacity(16 + header.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for (_, t) in tensors {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn take<'a>(bytes: &'a [u8], at: usize, n: usize) -> Result<&'a [u8], ContainerError> {
    bytes.get(at..at + n).ok_or(ContainerError::PayloadSize {
        declared: (at + n) as u64,
        found: bytes.len() as u64,
    })
}

pub fn decode_container(bytes: &[u8]) -> Result<(Value, Vec<(String, Tensor)>), ContainerError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(ContainerError::BadMagic);
    }
    if bytes.len() < 16 {
        return Err(ContainerError::Header(
            "file ends inside the fixed header".into(),
        ));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(ContainerError::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let header_bytes = bytes
        .get(16..16usize.saturating_add(header_len))
        .ok_or_else(|| {
            ContainerError::Header(format!("header of {header_len} bytes is truncated"))
        })?;
    let header: Header =
        serde_json::from_slice(header_bytes).map_err(|e| ContainerError::Header(e.to_string()))?;
    let payload = &bytes[16 + header_len..];
    if payload.len() as u64 != header.payload_bytes {
        return Err(ContainerError::PayloadSize {
            declared: header.payload_bytes,
            found: payload.len() as u64,
        });
    }
    let mut expected_offset = 0u64;
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for e in header.tensors {
        if e.dtype != "f64" {
            return Err(ContainerError::TensorTable(format!(
                "{}: unsupported dtype {}",
                e.name, e.dtype
            )));
        }
        let count: usize = e.shape.iter().product();
        if e.nbytes != (count * 8) as u64 {
            return Err(ContainerError::TensorTable(format!(
                "{}: shape {:?} needs {} bytes, table says {}",
                e.name,
                e.shape,
                count * 8,
                e.nbytes
            )));
        }
        if e.offset != expected_offset || e.offset + e.nbytes > header.payload_bytes {
            return Err(ContainerError::TensorTable(format!(
                "{}: offset {} out of place (expected {})",
                e.name, e.offset, expected_offset
            )));
        }
        let raw = take(payload, e.offset as usize, e.nbytes as usize)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let t = Tensor::from_vec(e.shape, data)
            .map_err(|err| ContainerError::TensorTable(err.to_string()))?;
        tensors.push((e.name, t));
        expected_offset += e.nbytes;
    }
    if expected_offset != header.payload_bytes {
        return Err(ContainerError::TensorTable(format!(
            "tensors cover {expected_offset} of {} payload bytes",
            header.payload_bytes
        )));
    }
    Ok((header.meta, tensors))
}

pub fn write_container(
    path: &std::path::Path,
    meta: &Value,
    tensors: &[(String, Tensor)],
) -> Result<()> {
    let bytes = encode_container(meta, tensors)?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_container(path: &std::path::Path) -> Result<(Value, Vec<(String, Tensor)>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_container(&bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn sample() -> Vec<u8> {
        let tensors = vec![
            (
                "a".to_string(),
                Tensor::matrix(2, 2, vec![1.0, -0.0, f64::MIN_POSITIVE, 1e300]),
            ),
            ("b".to_string(), Tensor::vector(vec![0.1, 0.2, 0.3])),
        ];
        encode_container(&json!({"k": 1}), &tensors).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let bytes = sample();
        let (meta, t) = decode_container(&bytes).unwrap();
        assert_eq!(meta, json!({"k": 1}));
        assert_eq!(t[0].1.data()[1].to_bits(), (-0.0f64).to_bits());
        assert_eq!(t[1].1.data(), &[0.1, 0.2, 0.3]);
        assert_eq!(encode_container(&meta, &t).unwrap(), bytes);
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = sample();
        bytes[0] = b'X';
        let err = decode_container(&bytes).unwrap_err();
        assert!(matches!(err, ContainerError::BadMagic));
        assert!(err.to_string().contains("not a checkpoint"));
    }

    #[test]
    fn wrong_version() {
        let mut bytes = sample();
        bytes[4] = 9;
        assert!(matches!(
            decode_container(&bytes),
            Err(ContainerError::Version { found: 9, .. })
        ));
    }

    #[test]
    fn truncated_payload() {
        let bytes = sample();
        let err = decode_container(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(matches!(err, ContainerError::PayloadSize { .. }));
        assert!(err.to_string().contains("payload size mismatch"));
    }

    #[test]
    fn inconsistent_table() {
        let meta = json!(null);
        let mut bytes =
            encode_container(&meta, &[("a".into(), Tensor::vector(vec![1.0, 2.0]))]).unwrap();
        let needle = b"\"shape\":[2]";
        let at = bytes
            .windows(needle.len())
            .position(|w| w == needle)
            .unwrap();
        bytes[at + needle.len() - 2] = b'3';
        let err = decode_container(&bytes).unwrap_err();
        assert!(matches!(err, ContainerError::TensorTable(_)), "{err:?}");
    }
}
