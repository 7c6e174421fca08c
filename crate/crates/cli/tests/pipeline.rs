//! End-to-end pipeline: simulate a tiny dataset on disk, featurize it,
//! augment the blobs, and evaluate metadata — exercising every subcommand
//! through the same entry points the binary uses.

mod common;

use common::{make_bank, make_rooms, small_config, RATE};

use seld_cli::commands::{augment, eval, featurize, simulate};
use seld_cli::features_io::{read_feature_blob, read_label_blob};
use seld_cli::manifest::Manifest;
use seld_cli::metadata::read_metadata_csv;
use seld_cli::wav::read_foa_wav;

struct Fixture {
    _dir: tempfile::TempDir,
    bank_csv: std::path::PathBuf,
    srir_root: std::path::PathBuf,
    out: std::path::PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let bank_dir = dir.path().join("bank");
    std::fs::create_dir_all(&bank_dir).unwrap();
    let bank_csv = make_bank(&bank_dir, 3);
    let srir_root = dir.path().join("srirs");
    std::fs::create_dir_all(&srir_root).unwrap();
    make_rooms(&srir_root, 2);
    let out = dir.path().join("out");
    Fixture {
        _dir: dir,
        bank_csv,
        srir_root,
        out,
    }
}

#[test]
fn simulate_featurize_augment_eval_chain() {
    let fx = fixture();
    let cfg = small_config();

    // simulate
    let dataset = fx.out.join("dataset");
    let manifest = simulate::run(
        &cfg,
        &simulate::SimulateArgs {
            bank_csv: &fx.bank_csv,
            srir_root: &fx.srir_root,
            out_dir: &dataset,
            resume: false,
        },
    )
    .unwrap();
    assert_eq!(manifest.entries.len(), 2);
    assert!(manifest.entries.iter().all(|e| e.is_ok()));
    for entry in &manifest.entries {
        assert!(entry.tags.contains_key("room"));
        let clip = read_foa_wav(&dataset.join(&entry.files[0]), RATE).unwrap();
        assert_eq!(clip.len(), (cfg.sim.clip_s * RATE as f64) as usize);
        // labeled events exist and respect the polyphony cap per frame
        let events = read_metadata_csv(&dataset.join(&entry.files[1])).unwrap();
        assert!(!events.is_empty());
        let mut per_frame = std::collections::BTreeMap::new();
        for e in &events {
            *per_frame.entry(e.frame).or_insert(0usize) += 1;
        }
        assert!(per_frame.values().all(|&n| n <= cfg.sim.polyphony_cap));
    }

    // featurize
    let feats = fx.out.join("feats");
    let fman = featurize::run(
        &cfg,
        &featurize::FeaturizeArgs {
            dataset: &dataset,
            out_dir: &feats,
        },
    )
    .unwrap();
    assert!(fman.entries.iter().all(|e| e.is_ok()));
    // 2 s clips at 1 s chunks -> 2 feature + 2 label blobs per clip
    let first = &fman.entries[0];
    assert_eq!(first.files.len(), 4);
    let (tensor, header) = read_feature_blob(&feats.join(&first.files[0])).unwrap();
    assert_eq!(header.shape[0], 7);
    assert_eq!(header.n_mels, cfg.features.n_mels);
    assert_eq!(header.config_hash, cfg.hash());
    assert_eq!(tensor.frames(), 58); // 1 s at 24 kHz, 1024-window, hop 400
    let (labels, lheader) = read_label_blob(&feats.join(&first.files[1])).unwrap();
    assert_eq!(labels.frames(), tensor.frames());
    assert_eq!(lheader.tracks, cfg.codec.tracks);
    // some label activity made it through the resampling
    let active: f64 = fman
        .entries
        .iter()
        .flat_map(|e| e.files.iter().filter(|f| f.ends_with(".labl")))
        .map(|f| read_label_blob(&feats.join(f)).unwrap().0.sed.sum())
        .sum();
    assert!(active > 0.0, "no active labels in any chunk");

    // augment (mask chains plus rotation)
    let aug = fx.out.join("aug");
    let aman = augment::run(
        &cfg,
        &augment::AugmentArgs {
            features_dir: &feats,
            out_dir: &aug,
            rotate: true,
        },
    )
    .unwrap();
    assert!(aman.entries.iter().all(|e| e.is_ok()));
    assert_eq!(aman.entries.len(), 4); // 2 clips x 2 chunks
    let (aug_tensor, _) = read_feature_blob(&aug.join(&first.files[0])).unwrap();
    assert_eq!(aug_tensor.frames(), tensor.frames());

    // eval: the dataset against itself must be a perfect score
    let (report, table) = eval::evaluate(
        &cfg,
        &eval::EvalArgs {
            refs_dir: &dataset.join("metadata"),
            preds_dir: &dataset.join("metadata"),
            group_by: None,
            manifest: None,
            json_out: None,
        },
    )
    .unwrap();
    assert_eq!(report.overall.er, 0.0);
    assert_eq!(report.overall.f, 1.0);
    assert_eq!(report.overall.lr, 1.0);
    assert!(report.overall.le_deg < 1e-9 || report.overall.le_undefined);
    assert!(table.contains("ER  0.00"), "table was:\n{table}");
    assert!(table.contains("F  100.0%"), "table was:\n{table}");

    // eval grouped by room with no explicit manifest path: the csvs live in
    // dataset/metadata, so the lookup should fall back to the dataset root
    let grouped = eval::evaluate(
        &cfg,
        &eval::EvalArgs {
            refs_dir: &dataset.join("metadata"),
            preds_dir: &dataset.join("metadata"),
            group_by: Some("room"),
            manifest: None,
            json_out: None,
        },
    );
    let (greport, _) = grouped.unwrap();
    let groups = greport.groups.unwrap();
    assert!(!groups.is_empty());
    for v in groups.values() {
        assert_eq!(v.er, 0.0);
        assert_eq!(v.lr, 1.0);
    }
}

#[test]
fn simulate_resume_skips_completed_clips() {
    let fx = fixture();
    let cfg = small_config();
    let dataset = fx.out.join("dataset");
    simulate::run(
        &cfg,
        &simulate::SimulateArgs {
            bank_csv: &fx.bank_csv,
            srir_root: &fx.srir_root,
            out_dir: &dataset,
            resume: false,
        },
    )
    .unwrap();
    let before = std::fs::metadata(dataset.join("foa/clip0000.wav")).unwrap();
    let mtime = before.modified().unwrap();

    // a resumed run rewrites nothing
    simulate::run(
        &cfg,
        &simulate::SimulateArgs {
            bank_csv: &fx.bank_csv,
            srir_root: &fx.srir_root,
            out_dir: &dataset,
            resume: true,
        },
    )
    .unwrap();
    let after = std::fs::metadata(dataset.join("foa/clip0000.wav")).unwrap();
    assert_eq!(after.modified().unwrap(), mtime, "resume rewrote a clip");

    // without --resume the batch regenerates (byte-identically)
    let bytes_before = std::fs::read(dataset.join("metadata/clip0000.csv")).unwrap();
    simulate::run(
        &cfg,
        &simulate::SimulateArgs {
            bank_csv: &fx.bank_csv,
            srir_root: &fx.srir_root,
            out_dir: &dataset,
            resume: false,
        },
    )
    .unwrap();
    assert_eq!(
        std::fs::read(dataset.join("metadata/clip0000.csv")).unwrap(),
        bytes_before
    );
    let manifest = Manifest::read(&dataset.join("manifest.json")).unwrap();
    assert_eq!(manifest.kind, "simulate");
    assert_eq!(manifest.config_hash, cfg.hash());
}
