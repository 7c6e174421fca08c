//! `augment`: apply augmentation chains to featurized blobs.
//!
//! Each (feature, label) pair gets an independently seeded chain mix;
//! items are processed in sorted order with per-item RNG streams, so runs
//! are reproducible and parallel-safe. When the op pool contains the
//! spectrogram mixup, the partner sample is the next item in sorted order
//! (cyclically); mask ops never touch labels. `--rotate` additionally
//! applies one of the 16 spatial rotations, drawn per item, co-rotating
//! label DoAs.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seld_core::augment::{apply_chains, rotate_features, OpKind, N_ROTATIONS};
use seld_core::codec::TrackLabelTensor;
use seld_core::dsp::FeatureTensor;

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::features_io::{
    read_feature_blob, read_label_blob, write_feature_blob, write_label_blob,
};
use crate::manifest::{Manifest, ManifestEntry};
use crate::workers;

pub struct AugmentArgs<'a> {
    /// Directory produced by `featurize` (features/, labels/, manifest.json).
    pub features_dir: &'a Path,
    pub out_dir: &'a Path,
    pub rotate: bool,
}

fn item_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x4155_0000 + index as u64);
    rng
}

struct Item {
    feat_rel: String,
    labl_rel: String,
    features: FeatureTensor,
    labels: TrackLabelTensor,
}

pub fn run(cfg: &PipelineConfig, args: &AugmentArgs) -> Result<Manifest> {
    let src_manifest = Manifest::read(&args.features_dir.join("manifest.json"))?;
    std::fs::create_dir_all(args.out_dir.join("features"))
        .map_err(|e| CliError::io(args.out_dir, e))?;
    std::fs::create_dir_all(args.out_dir.join("labels"))
        .map_err(|e| CliError::io(args.out_dir, e))?;

    // load every blob pair up front: partners for mixup come from the pool
    let mut pairs: Vec<(String, String)> = Vec::new();
    for entry in src_manifest.entries.iter().filter(|e| e.is_ok()) {
        let feats: Vec<&String> = entry.files.iter().filter(|f| f.ends_with(".feat")).collect();
        for feat_rel in feats {
            let labl_rel = feat_rel
                .replace("features/", "labels/")
                .replace(".feat", ".labl");
            pairs.push((feat_rel.clone(), labl_rel));
        }
    }
    pairs.sort();
    if pairs.is_empty() {
        return Err(CliError::Invalid(
            "no feature blobs listed in the manifest".into(),
        ));
    }
    let items: Vec<Item> = pairs
        .iter()
        .map(|(feat_rel, labl_rel)| -> Result<Item> {
            let (features, _) = read_feature_blob(&args.features_dir.join(feat_rel))?;
            let (labels, _) = read_label_blob(&args.features_dir.join(labl_rel))?;
            Ok(Item {
                feat_rel: feat_rel.clone(),
                labl_rel: labl_rel.clone(),
                features,
                labels,
            })
        })
        .collect::<Result<_>>()?;

    let hash = cfg.hash();
    let pool = workers::pool()?;
    let entries: Vec<ManifestEntry> = pool.install(|| {
        use rayon::prelude::*;
        (0..items.len())
            .into_par_iter()
            .map(|index| {
                let item = &items[index];
                let id = item
                    .feat_rel
                    .trim_start_matches("features/")
                    .trim_end_matches(".feat")
                    .to_string();
                let result = (|| -> Result<Vec<String>> {
                    let mut rng = item_rng(cfg.seed, index);
                    let chain_cfg = cfg.augment.chain_config();
                    let partner_idx = (index + 1) % items.len();
                    let partner =
                        if chain_cfg.pool.contains(&OpKind::MixupSpec) && items.len() > 1 {
                            Some((&items[partner_idx].features, &items[partner_idx].labels))
                        } else {
                            None
                        };
                    let (mut feat, mut labels) = apply_chains(
                        &item.features,
                        &item.labels,
                        cfg.augment.chains,
                        &chain_cfg,
                        partner,
                        &mut rng,
                    )?;
                    if args.rotate {
                        let r = rng.gen_range(0..N_ROTATIONS);
                        let (rf, rl) = rotate_features(&feat, &labels, r)?;
                        feat = rf;
                        labels = rl;
                    }
                    let (_, mut feat_header) =
                        read_feature_blob(&args.features_dir.join(&item.feat_rel))?;
                    let (_, mut labl_header) =
                        read_label_blob(&args.features_dir.join(&item.labl_rel))?;
                    feat_header.config_hash = hash.clone();
                    labl_header.config_hash = hash.clone();
                    write_feature_blob(&args.out_dir.join(&item.feat_rel), &feat, &feat_header)?;
                    write_label_blob(&args.out_dir.join(&item.labl_rel), &labels, &labl_header)?;
                    Ok(vec![item.feat_rel.clone(), item.labl_rel.clone()])
                })();
                match result {
                    Ok(files) => ManifestEntry {
                        id,
                        files,
                        seed: cfg.seed,
                        tags: Default::default(),
                        status: "ok".into(),
                    },
                    Err(e) => ManifestEntry {
                        id,
                        files: vec![],
                        seed: cfg.seed,
                        tags: Default::default(),
                        status: format!("error: {e}"),
                    },
                }
            })
            .collect()
    });

    let mut manifest = Manifest::new("augment", cfg);
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
