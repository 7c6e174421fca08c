//! Binary blob formats for feature and label tensors.
//!
//! Layout (both kinds): an 8-byte magic, a little-endian u32 header
//! length, a JSON header, then the tensor payload as little-endian f64 in
//! C (row-major) order. Feature blobs (`SELDFEAT`) hold one 7 x frames x
//! n_mels tensor; label blobs (`SELDLABL`) hold the SED tensor
//! (frames x tracks x classes) immediately followed by the DoA tensor
//! (frames x tracks x 3). The header carries the shape, channel layout,
//! and the effective config hash, so blobs are self-describing and
//! traceable.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use seld_core::codec::TrackLabelTensor;
use seld_core::dsp::FeatureTensor;

use crate::error::{CliError, Result};

pub const FEAT_MAGIC: &[u8; 8] = b"SELDFEAT";
pub const LABEL_MAGIC: &[u8; 8] = b"SELDLABL";

pub const FEATURE_CHANNELS: [&str; 7] = [
    "logmel_w", "logmel_x", "logmel_y", "logmel_z", "iv_x", "iv_y", "iv_z",
];

/// Header for a feature blob. Field order is the serialized order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureHeader {
    pub shape: [usize; 3],
    pub channels: Vec<String>,
    pub dtype: String,
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub config_hash: String,
    pub clip_id: String,
    pub chunk_index: usize,
    /// Feature frames at the tail that came from zero padding.
    pub pad_frames: usize,
}

/// Header for a label blob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelHeader {
    pub frames: usize,
    pub tracks: usize,
    pub classes: usize,
    pub dtype: String,
    pub config_hash: String,
    pub clip_id: String,
    pub chunk_index: usize,
    pub pad_frames: usize,
    /// Events dropped during encoding because they exceeded the track count.
    pub dropped: usize,
}

fn write_blob(path: &Path, magic: &[u8; 8], header_json: &str, tensors: &[&Array3<f64>]) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::with_capacity(
        12 + header_json.len() + tensors.iter().map(|t| t.len() * 8).sum::<usize>(),
    );
    out.extend_from_slice(magic);
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(header_json.as_bytes());
    for t in tensors {
        // iteration over a standard-layout Array3 is C order
        for v in t.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    file.write_all(&out).map_err(|e| CliError::io(path, e))
}

struct RawBlob {
    header_json: String,
    payload: Vec<f64>,
}

fn read_blob(path: &Path, magic: &[u8; 8]) -> Result<RawBlob> {
    let mut file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|e| CliError::io(path, e))?;
    if bytes.len() < 12 {
        return Err(CliError::blob(path, "file shorter than the fixed preamble"));
    }
    if &bytes[0..8] != magic {
        return Err(CliError::blob(
            path,
            format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&bytes[0..8]),
                String::from_utf8_lossy(magic)
            ),
        ));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if 12 + header_len > bytes.len() {
        return Err(CliError::blob(path, "declared header overruns the file"));
    }
    let header_json = String::from_utf8(bytes[12..12 + header_len].to_vec())
        .map_err(|_| CliError::blob(path, "header is not UTF-8"))?;
    let data = &bytes[12 + header_len..];
    if data.len() % 8 != 0 {
        return Err(CliError::blob(path, "payload is not whole f64 words"));
    }
    let payload = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(RawBlob { header_json, payload })
}

pub fn write_feature_blob(path: &Path, tensor: &FeatureTensor, header: &FeatureHeader) -> Result<()> {
    if header.shape != [7, tensor.frames(), tensor.n_mels()] {
        return Err(CliError::blob(path, "header shape disagrees with tensor"));
    }
    let json = serde_json::to_string(header).expect("header serializes");
    write_blob(path, FEAT_MAGIC, &json, &[&tensor.data])
}

pub fn read_feature_blob(path: &Path) -> Result<(FeatureTensor, FeatureHeader)> {
    let raw = read_blob(path, FEAT_MAGIC)?;
    let header: FeatureHeader = serde_json::from_str(&raw.header_json)
        .map_err(|e| CliError::blob(path, format!("header: {e}")))?;
    let expected: usize = header.shape.iter().product();
    if raw.payload.len() != expected {
        return Err(CliError::blob(
            path,
            format!("payload holds {} values, header wants {expected}", raw.payload.len()),
        ));
    }
    let data = Array3::from_shape_vec(
        (header.shape[0], header.shape[1], header.shape[2]),
        raw.payload,
    )
    .map_err(|e| CliError::blob(path, e.to_string()))?;
    Ok((FeatureTensor { data }, header))
}

pub fn write_label_blob(path: &Path, labels: &TrackLabelTensor, header: &LabelHeader) -> Result<()> {
    if (header.frames, header.tracks, header.classes)
        != (labels.frames(), labels.tracks(), labels.classes())
    {
        return Err(CliError::blob(path, "header shape disagrees with tensor"));
    }
    let json = serde_json::to_string(header).expect("header serializes");
    write_blob(path, LABEL_MAGIC, &json, &[&labels.sed, &labels.doa])
}

pub fn read_label_blob(path: &Path) -> Result<(TrackLabelTensor, LabelHeader)> {
    let raw = read_blob(path, LABEL_MAGIC)?;
    let header: LabelHeader = serde_json::from_str(&raw.header_json)
        .map_err(|e| CliError::blob(path, format!("header: {e}")))?;
    let (f, m, k) = (header.frames, header.tracks, header.classes);
    let sed_len = f * m * k;
    let doa_len = f * m * 3;
    if raw.payload.len() != sed_len + doa_len {
        return Err(CliError::blob(
            path,
            format!(
                "payload holds {} values, header wants {}",
                raw.payload.len(),
                sed_len + doa_len
            ),
        ));
    }
    let sed = Array3::from_shape_vec((f, m, k), raw.payload[..sed_len].to_vec())
        .map_err(|e| CliError::blob(path, e.to_string()))?;
    let doa = Array3::from_shape_vec((f, m, 3), raw.payload[sed_len..].to_vec())
        .map_err(|e| CliError::blob(path, e.to_string()))?;
    let labels = TrackLabelTensor::new(sed, doa).map_err(CliError::Core)?;
    Ok((labels, header))
}
