//! WAV reading and writing.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use pcg_core::Waveform;

#[derive(Debug, thiserror::Error)]
pub enum WavError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: malformed WAV: {detail}")]
    Format { path: PathBuf, detail: String },
    #[error("{path}: unsupported WAV encoding: {detail}")]
    Unsupported { path: PathBuf, detail: String },
    #[error("{path}: no samples")]
    Empty { path: PathBuf },
}

fn classify(path: &Path, e: hound::Error) -> WavError {
    let path = path.to_path_buf();
    match e {
        hound::Error::IoError(source) => WavError::Io { path, source },
        hound::Error::Unsupported => WavError::Unsupported {
            path,
            detail: "non-PCM codec".into(),
        },
        other => WavError::Format {
            path,
            detail: other.to_string(),
        },
    }
}

/// Read any 8/16/24/32-bit integer or 32-bit float PCM file as mono.
/// Channels are averaged; integers are scaled by their full-scale value.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform, WavError> {
    let path = path.as_ref();
    let reader = WavReader::new(BufReader::new(File::open(path).map_err(|source| {
        WavError::Io {
            path: path.into(),
            source,
        }
    })?))
    .map_err(|e| classify_read(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(|e| classify_read(path, e))?,
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let full_scale = (1i64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / full_scale))
                .collect::<Result<_, _>>()
                .map_err(|e| classify_read(path, e))?
        }
        (format, bits) => {
            return Err(WavError::Unsupported {
                path: path.into(),
                detail: format!("{bits}-bit {format:?}"),
            })
        }
    };
    if interleaved.len() < channels {
        return Err(WavError::Empty { path: path.into() });
    }
    let samples = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    Ok(Waveform::new(samples, spec.sample_rate))
}

/// Once the file is open, read failures mean truncated or malformed data.
fn classify_read(path: &Path, e: hound::Error) -> WavError {
    match e {
        hound::Error::IoError(source) => WavError::Format {
            path: path.into(),
            detail: source.to_string(),
        },
        other => classify(path, other),
    }
}

/// Quantize to 16-bit PCM mono. Values are clipped to `[-1, 1 - 2^-15]`.
pub fn write_wav(w: &Waveform, path: impl AsRef<Path>) -> Result<(), WavError> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: w.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| classify(path, e))?;
    let mut clipped = 0usize;
    for &s in &w.samples {
        if !(-1.0..=1.0).contains(&s) {
            clipped += 1;
        }
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(|e| classify(path, e))?;
    }
    if clipped > 0 {
        log::warn!(
            "{}: clipped {clipped} samples outside [-1, 1]",
            path.display()
        );
    }
    writer.finalize().map_err(|e| classify(path, e))
}
