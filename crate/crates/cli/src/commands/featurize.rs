//! `featurize`: turn a simulated dataset (FOA WAVs + metadata CSVs) into
//! feature and label blobs.
//!
//! Clips are cut into fixed-length chunks (default 5 s) with no overlap;
//! the final remainder is zero-padded to a full chunk and the padded frame
//! count is recorded in the blob header. Labels live at 100 ms metadata
//! resolution; each feature frame takes the labels of the metadata frame
//! containing its center (nearest-frame assignment), and the result is
//! encoded into the track-wise tensor format.

use std::collections::BTreeMap;
use std::path::Path;

use seld_core::codec::encode_labels;
use seld_core::dsp::{extract_features, frame_count, FoaClip};
use seld_core::event::{Event, EventList};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::features_io::{
    write_feature_blob, write_label_blob, FeatureHeader, LabelHeader, FEATURE_CHANNELS,
};
use crate::manifest::{Manifest, ManifestEntry};
use crate::metadata::read_metadata_csv;
use crate::wav::read_foa_wav;
use crate::workers;

pub struct FeaturizeArgs<'a> {
    /// Dataset directory holding foa/, metadata/, manifest.json.
    pub dataset: &'a Path,
    pub out_dir: &'a Path,
}

/// Metadata frame whose 100 ms span contains time `t_s`.
fn metadata_frame_at(t_s: f64, frame_s: f64) -> usize {
    (t_s / frame_s).floor().max(0.0) as usize
}

/// Resample metadata events (100 ms frames) onto feature frames: feature
/// frame f's labels come from the metadata frame containing its center.
pub fn resample_labels(
    events: &EventList,
    feature_frames: usize,
    chunk_offset_samples: usize,
    cfg: &PipelineConfig,
) -> EventList {
    let by_frame: BTreeMap<usize, Vec<&Event>> = {
        let mut m: BTreeMap<usize, Vec<&Event>> = BTreeMap::new();
        for e in events {
            m.entry(e.frame).or_default().push(e);
        }
        m
    };
    let sr = cfg.features.sample_rate as f64;
    let mut out = Vec::new();
    for f in 0..feature_frames {
        let center =
            (chunk_offset_samples + f * cfg.features.hop + cfg.features.n_fft / 2) as f64 / sr;
        let meta = metadata_frame_at(center, cfg.chunk.frame_s);
        if let Some(active) = by_frame.get(&meta) {
            for e in active {
                out.push(Event { frame: f, ..**e });
            }
        }
    }
    out
}

struct ChunkPlan {
    chunk_samples: usize,
    n_chunks: usize,
}

fn plan_chunks(len: usize, cfg: &PipelineConfig) -> ChunkPlan {
    let chunk_samples = (cfg.chunk.chunk_s * cfg.features.sample_rate as f64).round() as usize;
    let n_chunks = len.div_ceil(chunk_samples).max(1);
    ChunkPlan {
        chunk_samples,
        n_chunks,
    }
}

fn featurize_clip(
    cfg: &PipelineConfig,
    dataset: &Path,
    out_dir: &Path,
    entry: &ManifestEntry,
) -> Result<ManifestEntry> {
    let wav_rel = entry
        .files
        .iter()
        .find(|f| f.ends_with(".wav"))
        .ok_or_else(|| CliError::Invalid(format!("{}: no wav in manifest entry", entry.id)))?;
    let csv_rel = entry
        .files
        .iter()
        .find(|f| f.ends_with(".csv"))
        .ok_or_else(|| CliError::Invalid(format!("{}: no metadata in manifest entry", entry.id)))?;
    let clip = read_foa_wav(&dataset.join(wav_rel), cfg.features.sample_rate)?;
    let events = read_metadata_csv(&dataset.join(csv_rel))?;
    let hash = cfg.hash();

    let plan = plan_chunks(clip.len(), cfg);
    let frames_per_chunk = frame_count(plan.chunk_samples, cfg.features.n_fft, cfg.features.hop);
    let mut files = Vec::new();
    for chunk in 0..plan.n_chunks {
        let start = chunk * plan.chunk_samples;
        let end = ((chunk + 1) * plan.chunk_samples).min(clip.len());
        let mut padded = FoaClip::zeros(plan.chunk_samples, clip.sample_rate());
        {
            let dst = padded.samples_mut();
            for ch in 0..4 {
                for i in start..end {
                    dst[[ch, i - start]] = clip.samples()[[ch, i]];
                }
            }
        }
        // frames whose window begins in the zero-padded tail
        let real = end - start;
        let full_frames = if real >= cfg.features.n_fft {
            frame_count(real, cfg.features.n_fft, cfg.features.hop)
        } else {
            0
        };
        let pad_frames = frames_per_chunk - full_frames;

        let features = extract_features(&padded, &cfg.features)?;
        let chunk_events = resample_labels(&events, features.frames(), start, cfg);
        let encoded = encode_labels(
            &chunk_events,
            features.frames(),
            cfg.codec.tracks,
            cfg.codec.classes,
        )?;

        let feat_rel = format!("features/{}_c{chunk:02}.feat", entry.id);
        let labl_rel = format!("labels/{}_c{chunk:02}.labl", entry.id);
        write_feature_blob(
            &out_dir.join(&feat_rel),
            &features,
            &FeatureHeader {
                shape: [7, features.frames(), features.n_mels()],
                channels: FEATURE_CHANNELS.iter().map(|s| s.to_string()).collect(),
                dtype: "f64le".into(),
                sample_rate: cfg.features.sample_rate,
                n_fft: cfg.features.n_fft,
                hop: cfg.features.hop,
                n_mels: cfg.features.n_mels,
                config_hash: hash.clone(),
                clip_id: entry.id.clone(),
                chunk_index: chunk,
                pad_frames,
            },
        )?;
        write_label_blob(
            &out_dir.join(&labl_rel),
            &encoded.labels,
            &LabelHeader {
                frames: features.frames(),
                tracks: cfg.codec.tracks,
                classes: cfg.codec.classes,
                dtype: "f64le".into(),
                config_hash: hash.clone(),
                clip_id: entry.id.clone(),
                chunk_index: chunk,
                pad_frames,
                dropped: encoded.dropped,
            },
        )?;
        files.push(feat_rel);
        files.push(labl_rel);
    }

    Ok(ManifestEntry {
        id: entry.id.clone(),
        files,
        seed: entry.seed,
        tags: entry.tags.clone(),
        status: "ok".into(),
    })
}

pub fn run(cfg: &PipelineConfig, args: &FeaturizeArgs) -> Result<Manifest> {
    let dataset_manifest = Manifest::read(&args.dataset.join("manifest.json"))?;
    std::fs::create_dir_all(args.out_dir.join("features"))
        .map_err(|e| CliError::io(args.out_dir, e))?;
    std::fs::create_dir_all(args.out_dir.join("labels"))
        .map_err(|e| CliError::io(args.out_dir, e))?;

    let mut inputs: Vec<&ManifestEntry> =
        dataset_manifest.entries.iter().filter(|e| e.is_ok()).collect();
    inputs.sort_by(|a, b| a.id.cmp(&b.id));

    let pool = workers::pool()?;
    let entries: Vec<ManifestEntry> = pool.install(|| {
        use rayon::prelude::*;
        inputs
            .par_iter()
            .map(|entry| {
                featurize_clip(cfg, args.dataset, args.out_dir, entry).unwrap_or_else(|e| {
                    ManifestEntry {
                        id: entry.id.clone(),
                        files: vec![],
                        seed: entry.seed,
                        tags: entry.tags.clone(),
                        status: format!("error: {e}"),
                    }
                })
            })
            .collect()
    });

    let mut manifest = Manifest::new("featurize", cfg);
    manifest.entries = entries;
    let manifest_path = args.out_dir.join("manifest.json");
    manifest.write(&manifest_path)?;
    let failed = manifest.failed();
    if failed > 0 {
        return Err(CliError::PartialBatch {
            failed,
            total: manifest.entries.len(),
            manifest: manifest_path,
        });
    }
    Ok(manifest)
}
