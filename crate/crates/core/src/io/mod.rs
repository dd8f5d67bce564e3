//! On-disk formats: WAV audio, MSK1 masks and scene descriptor JSON.
//!
//! Writers go through [`atomic_write`] so concurrent workers never expose a
//! half-written file under its final name.

mod mask_file;
mod scene_file;
mod wav;

use std::fs;
use std::io::Write;
use std::path::Path;

pub use mask_file::{decode_mask, encode_mask, load_mask, store_mask, LoadedMask, MSK1_MAGIC};
pub use scene_file::{read_scene, write_scene};
pub use wav::{read_wav, read_wav_channels, write_wav, write_wav_channels, WavCodec, WriteStats};

use crate::error::{Error, Result};

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = temp_sibling(path);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub(crate) fn temp_sibling(path: &Path) -> std::path::PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.{}.tmp", std::process::id()))
}
