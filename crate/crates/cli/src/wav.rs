//! Multichannel PCM WAV reading and writing via `hound`.
//!
//! Only integer PCM at 16 or 24 bits is accepted; samples map to f64 in
//! [-1, 1) by the usual 2^(bits-1) scaling, so a write/read round trip is
//! exact to one LSB of the stored depth. Truncated payloads are an error,
//! never a silent short read.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use ndarray::Array2;
use seld_core::dsp::FoaClip;

use crate::error::{CliError, Result};

fn open_reader(path: &Path) -> Result<WavReader<std::io::BufReader<std::fs::File>>> {
    WavReader::open(path).map_err(|e| CliError::wav(path, e.to_string()))
}

fn read_interleaved(path: &Path) -> Result<(Vec<f64>, WavSpec)> {
    let mut reader = open_reader(path)?;
    let spec = reader.spec();
    if spec.sample_format != SampleFormat::Int {
        return Err(CliError::wav(path, "expected integer PCM samples"));
    }
    let scale = match spec.bits_per_sample {
        16 => 32768.0,
        24 => 8_388_608.0,
        other => {
            return Err(CliError::wav(
                path,
                format!("unsupported bit depth {other}, expected 16 or 24"),
            ))
        }
    };
    let declared = reader.len() as usize;
    let mut samples = Vec::with_capacity(declared);
    for s in reader.samples::<i32>() {
        let v = s.map_err(|e| CliError::wav(path, format!("payload: {e}")))?;
        samples.push(v as f64 / scale);
    }
    if samples.len() != declared {
        return Err(CliError::wav(
            path,
            format!(
                "header declares {declared} samples but payload holds {}",
                samples.len()
            ),
        ));
    }
    Ok((samples, spec))
}

/// Read a 4-channel FOA clip, insisting on the expected sample rate
/// (resampling is out of scope).
pub fn read_foa_wav(path: &Path, expected_rate: u32) -> Result<FoaClip> {
    let (samples, spec) = read_interleaved(path)?;
    if spec.channels != 4 {
        return Err(CliError::wav(
            path,
            format!("channel count: expected 4, got {}", spec.channels),
        ));
    }
    if spec.sample_rate != expected_rate {
        return Err(CliError::wav(
            path,
            format!(
                "sample rate: expected {expected_rate} Hz, got {} Hz",
                spec.sample_rate
            ),
        ));
    }
    let frames = samples.len() / 4;
    let mut data = Array2::zeros((4, frames));
    for i in 0..frames {
        for ch in 0..4 {
            data[[ch, i]] = samples[i * 4 + ch];
        }
    }
    FoaClip::new(data, spec.sample_rate).map_err(CliError::Core)
}

/// Read a mono clip (dry event samples, for the sample bank).
pub fn read_mono_wav(path: &Path, expected_rate: u32) -> Result<Vec<f64>> {
    let (samples, spec) = read_interleaved(path)?;
    if spec.channels != 1 {
        return Err(CliError::wav(
            path,
            format!("channel count: expected 1, got {}", spec.channels),
        ));
    }
    if spec.sample_rate != expected_rate {
        return Err(CliError::wav(
            path,
            format!(
                "sample rate: expected {expected_rate} Hz, got {} Hz",
                spec.sample_rate
            ),
        ));
    }
    Ok(samples)
}

fn quantize(v: f64, scale: f64) -> i32 {
    let max = scale - 1.0;
    (v * scale).round().clamp(-scale, max) as i32
}

fn write_channels(path: &Path, data: &Array2<f64>, rate: u32, bits: u16) -> Result<()> {
    let scale = match bits {
        16 => 32768.0,
        24 => 8_388_608.0,
        other => {
            return Err(CliError::wav(
                path,
                format!("unsupported bit depth {other}, expected 16 or 24"),
            ))
        }
    };
    let (channels, frames) = data.dim();
    let spec = WavSpec {
        channels: channels as u16,
        sample_rate: rate,
        bits_per_sample: bits,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| CliError::wav(path, e.to_string()))?;
    for i in 0..frames {
        for ch in 0..channels {
            writer
                .write_sample(quantize(data[[ch, i]], scale))
                .map_err(|e| CliError::wav(path, e.to_string()))?;
        }
    }
    writer.finalize().map_err(|e| CliError::wav(path, e.to_string()))?;
    Ok(())
}

/// Write a 4-channel FOA clip as integer PCM at the given depth.
pub fn write_foa_wav(clip: &FoaClip, path: &Path, bits: u16) -> Result<()> {
    write_channels(path, clip.samples(), clip.sample_rate(), bits)
}

/// Write a mono waveform as integer PCM at the given depth.
pub fn write_mono_wav(samples: &[f64], rate: u32, path: &Path, bits: u16) -> Result<()> {
    let data = Array2::from_shape_vec((1, samples.len()), samples.to_vec())
        .expect("shape matches length");
    write_channels(path, &data, rate, bits)
}
