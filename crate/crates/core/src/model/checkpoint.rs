//! SEGW checkpoints: `b"SEGW"`, `u32` version (1), C, k, then the kernel
//! (`C*4*k*k`) and bias (`C`) as little-endian `f64`, row-major.

use std::path::Path;

use super::conv::ModelParams;
use crate::error::{Error, Result};
use crate::types::INPUT_CHANNELS;

pub const MAGIC: &[u8; 4] = b"SEGW";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;

pub fn encode(params: &ModelParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * params.num_params());
    out.extend_from_slice(MAGIC);
    for v in [VERSION, params.num_classes() as u32, params.kernel_size() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in params.kernel.iter().chain(&params.bias) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<ModelParams> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("SEGW file too short: {} bytes", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format(format!("bad magic {:?}", &bytes[..4])));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    if word(4) != VERSION as usize {
        return Err(Error::Format(format!("unsupported SEGW version {}", word(4))));
    }
    let (c, k) = (word(8), word(12));
    let kernel_len = k
        .checked_mul(k)
        .and_then(|n| n.checked_mul(INPUT_CHANNELS))
        .and_then(|n| n.checked_mul(c));
    let expected = kernel_len
        .and_then(|n| n.checked_add(c))
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN));
    if expected != Some(bytes.len()) {
        return Err(Error::Format(format!(
            "header declares C={c}, k={k} but file has {} bytes",
            bytes.len()
        )));
    }
    let kernel_len = kernel_len.unwrap();
    let values: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let bias = values[kernel_len..].to_vec();
    let mut kernel = values;
    kernel.truncate(kernel_len);
    ModelParams::new(c, k, kernel, bias).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_checkpoint(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(params)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    decode(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
