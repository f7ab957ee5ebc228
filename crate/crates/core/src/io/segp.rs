//! SEGP probability-map files.
//!
//! Layout (little-endian): `b"SEGP"`, then `u32` version (1), C, H, W,
//! reserved (0), then `C*H*W` `f32` values, channel-major. Total size is
//! `24 + 4*C*H*W` bytes.

use std::path::Path;

use crate::error::{Error, Result};
use crate::types::ProbMap;

pub const MAGIC: &[u8; 4] = b"SEGP";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;

pub fn encode(probs: &ProbMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * probs.data().len());
    out.extend_from_slice(MAGIC);
    for v in [
        VERSION,
        probs.channels() as u32,
        probs.height() as u32,
        probs.width() as u32,
        0,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &v in probs.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

fn read_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

/// Decodes a SEGP buffer. Never allocates more than the buffer length
/// implies, so arbitrary headers are safe.
pub fn decode(bytes: &[u8]) -> Result<ProbMap> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "SEGP file too short for header: {} bytes",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format(format!("bad magic {:?}", &bytes[..4])));
    }
    let version = read_u32(bytes, 4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported SEGP version {version}")));
    }
    let (c, h, w) = (
        read_u32(bytes, 8) as usize,
        read_u32(bytes, 12) as usize,
        read_u32(bytes, 16) as usize,
    );
    let reserved = read_u32(bytes, 20);
    if reserved != 0 {
        return Err(Error::Format(format!("reserved field is {reserved}, expected 0")));
    }
    let expected = c
        .checked_mul(h)
        .and_then(|n| n.checked_mul(w))
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN));
    if expected != Some(bytes.len()) {
        return Err(Error::Format(format!(
            "header declares {c}x{h}x{w} but file has {} bytes",
            bytes.len()
        )));
    }
    let mut data = Vec::with_capacity(c * h * w);
    for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::Format(format!("non-finite value {v} at entry {i}")));
        }
        if v < 0.0 {
            return Err(Error::Format(format!("negative probability {v} at entry {i}")));
        }
        data.push(v as f64);
    }
    let plane = h * w;
    let sums_to_one = c > 0
        && (0..plane).all(|p| {
            let s: f64 = (0..c).map(|k| data[k * plane + p]).sum();
            (s - 1.0).abs() <= 1e-5
        });
    Ok(ProbMap::from_parts_unchecked(c, h, w, data, sums_to_one))
}

pub fn write_prob_map(probs: &ProbMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(probs)).map_err(|e| Error::io(path, e))
}

pub fn read_prob_map(path: impl AsRef<Path>) -> Result<ProbMap> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_map_layout() {
        let map = ProbMap::new(2, 1, 1, vec![0.25, 0.75]).unwrap();
        let bytes = encode(&map);
        assert_eq!(bytes.len(), HEADER_LEN + 8);
        assert_eq!(&bytes[..4], b"SEGP");
        assert_eq!(&bytes[4..24], &[1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&bytes[24..28], &0.25f32.to_le_bytes());
        let back = decode(&bytes).unwrap();
        assert_eq!(back.data(), map.data());
        assert!(back.is_normalized());
    }

    #[test]
    fn channel_major_order() {
        let map = ProbMap::new(2, 1, 2, vec![0.1, 0.2, 0.9, 0.8]).unwrap();
        let bytes = encode(&map);
        let vals: Vec<f32> = bytes[24..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(vals, vec![0.1, 0.2, 0.9, 0.8]);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let map = ProbMap::new(2, 1, 1, vec![0.25, 0.75]).unwrap();
        let bytes = encode(&map);
        let err = decode(&bytes[..bytes.len() - 1]).unwrap_err();
        assert!(err.to_string().contains("header declares"), "{err}");
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = encode(&ProbMap::new(2, 1, 1, vec![0.5, 0.5]).unwrap());
        bytes[0] = b'X';
        assert!(decode(&bytes).unwrap_err().to_string().contains("magic"));
    }

    #[test]
    fn non_finite_payload_is_rejected() {
        let mut bytes = encode(&ProbMap::new(2, 1, 1, vec![0.5, 0.5]).unwrap());
        bytes[24..28].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(decode(&bytes).is_err());
    }

    #[test]
    fn huge_header_does_not_allocate() {
        let mut bytes = Vec::from(*MAGIC);
        for v in [1u32, u32::MAX, u32::MAX, u32::MAX, 0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        assert!(decode(&bytes).is_err());
    }
}
