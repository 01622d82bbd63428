//! RIFF/WAVE reading and writing for 16-bit PCM and 32-bit float.

use std::path::Path;

use hound::{SampleFormat, WavSpec};

use super::AudioBuffer;
use crate::error::{Error, Result};

const PCM16_SCALE: f64 = 32768.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WavFormat {
    #[default]
    Pcm16,
    Float32,
}

/// Outcome of a successful write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WavWriteReport {
    /// Samples outside [-1, 1] that were clipped (pcm16 only).
    pub clipped: usize,
}

fn map_hound(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) => Error::Io(e),
        hound::Error::FormatError(reason) => Error::MalformedWav {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        },
        hound::Error::UnfinishedSample => Error::MalformedWav {
            path: path.to_path_buf(),
            reason: "data chunk ends in the middle of a sample".into(),
        },
        other => Error::UnsupportedCodec {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut reader = hound::WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    let n_channels = spec.channels as usize;
    if n_channels == 0 {
        return Err(Error::MalformedWav {
            path: path.to_path_buf(),
            reason: "zero channels".into(),
        });
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / PCM16_SCALE))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (fmt, bits) => {
            return Err(Error::UnsupportedCodec {
                path: path.to_path_buf(),
                reason: format!("{bits}-bit {fmt:?} samples"),
            })
        }
    };
    if !interleaved.len().is_multiple_of(n_channels) {
        return Err(Error::MalformedWav {
            path: path.to_path_buf(),
            reason: "sample count is not a multiple of the channel count".into(),
        });
    }
    let len = interleaved.len() / n_channels;
    let mut channels = vec![Vec::with_capacity(len); n_channels];
    for frame in interleaved.chunks_exact(n_channels) {
        for (c, &v) in frame.iter().enumerate() {
            channels[c].push(v);
        }
    }
    AudioBuffer::new(channels, spec.sample_rate).map_err(|e| match e {
        Error::InvalidBuffer(reason) => Error::MalformedWav {
            path: path.to_path_buf(),
            reason,
        },
        other => other,
    })
}

pub fn write_wav(
    buffer: &AudioBuffer,
    path: impl AsRef<Path>,
    format: WavFormat,
) -> Result<WavWriteReport> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: buffer.num_channels() as u16,
        sample_rate: buffer.sample_rate(),
        bits_per_sample: match format {
            WavFormat::Pcm16 => 16,
            WavFormat::Float32 => 32,
        },
        sample_format: match format {
            WavFormat::Pcm16 => SampleFormat::Int,
            WavFormat::Float32 => SampleFormat::Float,
        },
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    let mut report = WavWriteReport::default();
    match format {
        WavFormat::Pcm16 => {
            for v in buffer.interleaved() {
                if v.abs() > 1.0 {
                    report.clipped += 1;
                }
                let q = (v * PCM16_SCALE).round().clamp(-32768.0, 32767.0) as i16;
                writer.write_sample(q).map_err(|e| map_hound(path, e))?;
            }
        }
        WavFormat::Float32 => {
            for v in buffer.interleaved() {
                writer
                    .write_sample(v as f32)
                    .map_err(|e| map_hound(path, e))?;
            }
        }
    }
    writer.finalize().map_err(|e| map_hound(path, e))?;
    if report.clipped > 0 {
        log::warn!(
            "{}: {} samples outside [-1, 1] clipped",
            path.display(),
            report.clipped
        );
    }
    Ok(report)
}
