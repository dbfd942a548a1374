//! Checkpoint files: a fixed little-endian header followed by the raw
//! parameter vector.
//!
//! ```text
//! offset  size  field
//!      0     8  magic "SMDLCKPT"
//!      8     4  version (u32) = 1
//!     12     8  d, parameter count (u64)
//!     20     8  step (u64)
//!     28     8  seed (u64)
//!     36     8  spec hash (u64)
//!     44     8  train loss (f64)
//!     52   8·d  parameters (f64)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use smdl_core::zoo::Checkpoint;

use crate::error::{LabError, Result};

pub const MAGIC: &[u8; 8] = b"SMDLCKPT";
pub const VERSION: u32 = 1;
const HEADER: usize = 52;

pub fn encode(c: &Checkpoint) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + 8 * c.params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(c.params.len() as u64).to_le_bytes());
    out.extend_from_slice(&c.step.to_le_bytes());
    out.extend_from_slice(&c.seed.to_le_bytes());
    out.extend_from_slice(&c.spec_hash.to_le_bytes());
    out.extend_from_slice(&c.train_loss.to_le_bytes());
    for p in &c.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Checkpoint, String> {
    if bytes.len() < HEADER {
        return Err(format!("{} bytes is shorter than the header", bytes.len()));
    }
    if &bytes[..8] != MAGIC {
        return Err("bad magic".into());
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let d = u64_at(12) as usize;
    let expected = d.checked_mul(8).and_then(|b| b.checked_add(HEADER));
    if expected != Some(bytes.len()) {
        return Err(format!("header says {d} parameters but the file has {} bytes", bytes.len()));
    }
    let params = bytes[HEADER..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Checkpoint {
        step: u64_at(20),
        seed: u64_at(28),
        spec_hash: u64_at(36),
        train_loss: f64::from_bits(u64_at(44)),
        params,
    })
}

pub fn file_name(step: u64) -> String {
    format!("step_{step:010}.ckpt")
}

pub fn write(dir: &Path, c: &Checkpoint) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    let path = dir.join(file_name(c.step));
    fs::write(&path, encode(c)).map_err(|e| LabError::io(&path, e))?;
    Ok(path)
}

pub fn read(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| LabError::io(path, e))?;
    decode(&bytes).map_err(|m| LabError::format(path, m))
}

/// Every `*.ckpt` in `dir`, sorted by step.
pub fn read_all(dir: &Path) -> Result<Vec<Checkpoint>> {
    let entries = fs::read_dir(dir).map_err(|e| LabError::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let p = entry.map_err(|e| LabError::io(dir, e))?.path();
        if p.extension().is_some_and(|e| e == "ckpt") {
            paths.push(p);
        }
    }
    let mut out = paths.iter().map(|p| read(p)).collect::<Result<Vec<_>>>()?;
    out.sort_by_key(|c| c.step);
    if out.is_empty() {
        return Err(LabError::format(dir, "no checkpoint files; run train-toy first"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        Checkpoint {
            step: 42,
            params: vec![1.5, -0.0, f64::MIN_POSITIVE, 3e300],
            train_loss: 0.125,
            spec_hash: 0xdead_beef,
            seed: 7,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample();
        let back = decode(&encode(&c)).unwrap();
        assert_eq!(back.step, 42);
        assert_eq!(back.params.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), c.params.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        assert_eq!(encode(&back), encode(&c));
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&sample());
        assert_eq!(&bytes[..8], b"SMDLCKPT");
        assert_eq!(bytes.len(), 52 + 4 * 8);
        assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 4);
    }

    #[test]
    fn truncated_and_corrupt_files_are_rejected() {
        let bytes = encode(&sample());
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut v2 = bytes;
        v2[8] = 2;
        assert!(decode(&v2).unwrap_err().contains("version"));
    }
}
