//! MSK1: `b"MSK1"`, `n_bins: u32 LE`, `n_frames: u32 LE`, then
//! `n_bins · n_frames` little-endian `f32` values, bin-major.

use std::fs;
use std::path::Path;

use super::atomic_write;
use crate::error::{Error, Result};
use crate::mask::TfMask;
use crate::scalar::Real;

pub const MSK1_MAGIC: &[u8; 4] = b"MSK1";
const HEADER_LEN: usize = 12;

/// A decoded mask plus the number of out-of-range values clamped into [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedMask {
    pub mask: TfMask<f32>,
    pub clamped: usize,
}

pub fn encode_mask<T: Real>(mask: &TfMask<T>) -> Result<Vec<u8>> {
    let n_bins = u32::try_from(mask.n_bins()).map_err(|_| Error::Size("too many bins".into()))?;
    let n_frames =
        u32::try_from(mask.n_frames()).map_err(|_| Error::Size("too many frames".into()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * mask.values().len());
    out.extend_from_slice(MSK1_MAGIC);
    out.extend_from_slice(&n_bins.to_le_bytes());
    out.extend_from_slice(&n_frames.to_le_bytes());
    for v in mask.values() {
        out.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_mask(bytes: &[u8]) -> Result<LoadedMask> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncation {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    if &bytes[..4] != MSK1_MAGIC {
        return Err(Error::Format(format!("bad mask magic {:?}", &bytes[..4])));
    }
    let n_bins = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let n_frames = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = n_bins
        .checked_mul(n_frames)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Format("mask dimensions overflow".into()))?;
    if bytes.len() < expected {
        return Err(Error::Truncation {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::Format(format!(
            "{} trailing bytes after mask payload",
            bytes.len() - expected
        )));
    }
    let mut clamped = 0;
    let mut values = Vec::with_capacity(n_bins * n_frames);
    for chunk in bytes[HEADER_LEN..].chunks_exact(4) {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if v.is_nan() {
            return Err(Error::Format("NaN in mask payload".into()));
        }
        if !(0.0..=1.0).contains(&v) {
            clamped += 1;
        }
        values.push(v.clamp(0.0, 1.0));
    }
    Ok(LoadedMask {
        mask: TfMask::from_values(n_bins, n_frames, values)?,
        clamped,
    })
}

pub fn store_mask<T: Real>(mask: &TfMask<T>, path: &Path) -> Result<()> {
    atomic_write(path, &encode_mask(mask)?)
}

pub fn load_mask(path: &Path) -> Result<LoadedMask> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_mask(&bytes)
}
