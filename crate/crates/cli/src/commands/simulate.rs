//! `simulate`: synthesize a dataset of FOA scene clips plus metadata.
//!
//! Each clip gets its own RNG stream derived from (seed, clip index), so a
//! parallel run produces exactly the serial output and a re-run with the
//! same seed is byte-identical. Completed clips listed in an existing
//! manifest are skipped, making interrupted batches resumable. Failures
//! are recorded per clip and the batch keeps going; the manifest then
//! doubles as the failure report.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seld_core::sim::{mix_scene, plan_scene, SampleBank};

use crate::bank::load_bank;
use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::manifest::{Manifest, ManifestEntry};
use crate::metadata::write_metadata_csv;
use crate::srir_io::{load_rooms, Room};
use crate::wav::write_foa_wav;
use crate::workers;

pub struct SimulateArgs<'a> {
    pub bank_csv: &'a Path,
    pub srir_root: &'a Path,
    pub out_dir: &'a Path,
    pub resume: bool,
}

fn clip_id(index: usize) -> String {
    format!("clip{index:04}")
}

/// Derive the per-clip RNG: one seed, one independent stream per clip.
fn clip_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

fn synthesize_clip(
    cfg: &PipelineConfig,
    bank: &SampleBank,
    rooms: &[Room],
    out_dir: &Path,
    index: usize,
) -> Result<ManifestEntry> {
    let id = clip_id(index);
    let mut rng = clip_rng(cfg.seed, index);
    let room = &rooms[rng.gen_range(0..rooms.len())];
    let scene_cfg = cfg.sim.scene_config();
    let plan = plan_scene(bank, &room.set, &scene_cfg, &mut rng)?;
    let ambience = if room.ambience.is_empty() {
        None
    } else {
        Some(&room.ambience[rng.gen_range(0..room.ambience.len())])
    };
    let mix = mix_scene(&plan, bank, &room.set, ambience)?;

    // guard the 16-bit range; a global scale preserves the mixed SNR
    let peak = mix
        .clip
        .samples()
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let clip = if peak > 0.99 {
        let scaled = mix.clip.samples() * (0.99 / peak);
        seld_core::dsp::FoaClip::new(scaled, mix.clip.sample_rate())?
    } else {
        mix.clip
    };

    let wav_rel = format!("foa/{id}.wav");
    let csv_rel = format!("metadata/{id}.csv");
    write_foa_wav(&clip, &out_dir.join(&wav_rel), 16)?;
    write_metadata_csv(&mix.events, &out_dir.join(&csv_rel))?;

    let mut tags = BTreeMap::new();
    tags.insert("room".to_string(), room.name.clone());
    tags.insert("variant".to_string(), cfg.sim.variant.clone());
    Ok(ManifestEntry {
        id,
        files: vec![wav_rel, csv_rel],
        seed: cfg.seed,
        tags,
        status: "ok".to_string(),
    })
}

pub fn run(cfg: &PipelineConfig, args: &SimulateArgs) -> Result<Manifest> {
    let rate = cfg.features.sample_rate;
    let mut bank = load_bank(args.bank_csv, cfg.codec.classes, rate)?;
    if let Some([lo, hi]) = cfg.sim.gain_db {
        for entry in &mut bank.entries {
            entry.gain_lo_db = lo;
            entry.gain_hi_db = hi;
        }
    }
    let rooms = load_rooms(args.srir_root, rate)?;

    std::fs::create_dir_all(args.out_dir.join("foa"))
        .map_err(|e| CliError::io(args.out_dir, e))?;
    std::fs::create_dir_all(args.out_dir.join("metadata"))
        .map_err(|e| CliError::io(args.out_dir, e))?;

    let manifest_path = args.out_dir.join("manifest.json");
    let done = if args.resume && manifest_path.exists() {
        Manifest::read(&manifest_path)?.completed(args.out_dir)
    } else {
        BTreeMap::new()
    };

    let pool = workers::pool()?;
    let entries: Vec<ManifestEntry> = pool.install(|| {
        use rayon::prelude::*;
        (0..cfg.sim.clip_count)
            .into_par_iter()
            .map(|i| {
                let id = clip_id(i);
                if let Some(entry) = done.get(&id) {
                    return entry.clone();
                }
                synthesize_clip(cfg, &bank, &rooms, args.out_dir, i).unwrap_or_else(|e| {
                    ManifestEntry {
                        id,
                        files: vec![],
                        seed: cfg.seed,
                        tags: BTreeMap::new(),
                        status: format!("error: {e}"),
                    }
                })
            })
            .collect()
    });

    // entries come back in index order because the map preserves input order
    let mut manifest = Manifest::new("simulate", cfg);
    manifest.entries = entries;
    manifest.write(&manifest_path)?;
    let failed = manifest.failed();
    if failed > 0 {
        return Err(CliError::PartialBatch {
            failed,
            total: cfg.sim.clip_count,
            manifest: manifest_path,
        });
    }
    Ok(manifest)
}
