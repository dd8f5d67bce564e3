use std::fs;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::temp_sibling;
use crate::error::{Error, Result};
use crate::signal::{TimeSignal, SAMPLE_RATE};

/// Sample encoding used when writing WAV files.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WavCodec {
    Pcm16,
    Float32,
}

/// Bookkeeping returned by the writers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WriteStats {
    /// Samples outside [−1, 1] that were saturated (PCM only).
    pub clipped: usize,
}

fn hound_err(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other}", path.display())),
    }
}

/// Reads every channel of a 16 kHz PCM16 or float32 WAV file.
pub fn read_wav_channels(path: &Path) -> Result<Vec<TimeSignal<f64>>> {
    let reader = WavReader::open(path).map_err(|e| hound_err(path, e))?;
    let spec = reader.spec();
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::Rate {
            found: spec.sample_rate,
            expected: SAMPLE_RATE,
        });
    }
    let n_ch = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| hound_err(path, e))?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| hound_err(path, e))?,
        (fmt, bits) => {
            return Err(Error::Format(format!(
                "{}: unsupported codec {fmt:?}/{bits} bit",
                path.display()
            )))
        }
    };
    if interleaved.is_empty() {
        return Err(Error::Empty(format!("{}: no samples", path.display())));
    }
    (0..n_ch)
        .map(|c| {
            let samples = interleaved.iter().skip(c).step_by(n_ch).copied().collect();
            TimeSignal::new(samples, spec.sample_rate)
        })
        .collect()
}

/// Reads one channel of a WAV file.
pub fn read_wav(path: &Path, channel: usize) -> Result<TimeSignal<f64>> {
    let mut channels = read_wav_channels(path)?;
    if channel >= channels.len() {
        return Err(Error::Size(format!(
            "{}: channel {channel} requested, file has {}",
            path.display(),
            channels.len()
        )));
    }
    Ok(channels.swap_remove(channel))
}

pub fn write_wav(signal: &TimeSignal<f64>, path: &Path, codec: WavCodec) -> Result<WriteStats> {
    write_wav_channels(std::slice::from_ref(signal), path, codec)
}

/// Writes equally long channels as one interleaved WAV file.
pub fn write_wav_channels(
    channels: &[TimeSignal<f64>],
    path: &Path,
    codec: WavCodec,
) -> Result<WriteStats> {
    let first = channels
        .first()
        .ok_or_else(|| Error::Empty("no channels to write".into()))?;
    let len = first.len();
    let rate = first.sample_rate();
    if channels.iter().any(|c| c.len() != len || c.sample_rate() != rate) {
        return Err(Error::Size("channels differ in length or rate".into()));
    }
    let spec = WavSpec {
        channels: channels.len() as u16,
        sample_rate: rate,
        bits_per_sample: match codec {
            WavCodec::Pcm16 => 16,
            WavCodec::Float32 => 32,
        },
        sample_format: match codec {
            WavCodec::Pcm16 => SampleFormat::Int,
            WavCodec::Float32 => SampleFormat::Float,
        },
    };
    let tmp = temp_sibling(path);
    let mut stats = WriteStats::default();
    {
        let mut w = WavWriter::create(&tmp, spec).map_err(|e| hound_err(&tmp, e))?;
        for i in 0..len {
            for ch in channels {
                let x = ch.samples()[i];
                match codec {
                    WavCodec::Float32 => w.write_sample(x as f32),
                    WavCodec::Pcm16 => {
                        if !(-1.0..=1.0).contains(&x) {
                            stats.clipped += 1;
                        }
                        let q = (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                        w.write_sample(q)
                    }
                }
                .map_err(|e| hound_err(&tmp, e))?;
            }
        }
        w.finalize().map_err(|e| hound_err(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(stats)
}
