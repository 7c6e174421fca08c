//! Pipeline configuration: defaults, then an optional TOML file, then
//! `--set key=value` overrides, in that precedence. Unknown keys are
//! rejected with a nearest-known-key suggestion instead of being silently
//! ignored, and every batch output embeds the effective config plus its
//! hash so artifacts are traceable to the exact settings that made them.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use seld_core::augment::{ChainConfig, OpKind, OpRanges};
use seld_core::dsp::FeatureConfig;
use seld_core::sim::SceneConfig;

use crate::error::{CliError, Result};

/// Track-format and loss parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecConfig {
    /// Output tracks (M).
    pub tracks: usize,
    /// Sound event classes (K).
    pub classes: usize,
    /// SED/DoA loss weight.
    pub lambda: f64,
    /// SED decoding threshold.
    pub threshold: f64,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            tracks: 3,
            classes: 13,
            lambda: 0.5,
            threshold: 0.5,
        }
    }
}

/// Augmentation parameters: how many chains to mix plus the chain sampler
/// settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    /// Chains blended per sample (the mixing width k).
    pub chains: usize,
    pub pool: Vec<OpKind>,
    pub depth_lo: usize,
    pub depth_hi: usize,
    /// Dirichlet/Beta concentration for branch and skip weights.
    pub alpha: f64,
    pub ranges: OpRanges,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        let chain = ChainConfig::default();
        Self {
            chains: 3,
            pool: chain.pool,
            depth_lo: chain.depth_lo,
            depth_hi: chain.depth_hi,
            alpha: chain.alpha,
            ranges: chain.ranges,
        }
    }
}

impl AugmentConfig {
    pub fn chain_config(&self) -> ChainConfig {
        ChainConfig {
            pool: self.pool.clone(),
            depth_lo: self.depth_lo,
            depth_hi: self.depth_hi,
            alpha: self.alpha,
            ranges: self.ranges.clone(),
        }
    }
}

/// Scene-synthesis parameters for the `simulate` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Dataset variant tag recorded in the manifest.
    pub variant: String,
    pub clip_count: usize,
    pub clip_s: f64,
    pub n_events: usize,
    pub polyphony_cap: usize,
    pub snr_db_lo: f64,
    pub snr_db_hi: f64,
    pub moving_prob: f64,
    pub max_retries: usize,
    /// Metadata frame length in seconds.
    pub frame_s: f64,
    /// When set, overrides every bank entry's own gain range.
    pub gain_db: Option<[f64; 2]>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            variant: "A".to_string(),
            clip_count: 2,
            clip_s: 60.0,
            n_events: 14,
            polyphony_cap: 3,
            snr_db_lo: 6.0,
            snr_db_hi: 30.0,
            moving_prob: 0.25,
            max_retries: 100,
            frame_s: 0.1,
            gain_db: None,
        }
    }
}

impl SimConfig {
    pub fn scene_config(&self) -> SceneConfig {
        SceneConfig {
            duration_s: self.clip_s,
            n_events: self.n_events,
            polyphony_cap: self.polyphony_cap,
            snr_db_lo: self.snr_db_lo,
            snr_db_hi: self.snr_db_hi,
            moving_prob: self.moving_prob,
            max_retries: self.max_retries,
            frame_s: self.frame_s,
        }
    }
}

/// Evaluation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Metadata frames per scoring segment.
    pub frames_per_segment: usize,
    /// Angular threshold for a location-sensitive true positive, degrees.
    pub threshold_deg: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            frames_per_segment: 10,
            threshold_deg: 20.0,
        }
    }
}

/// Featurization parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChunkConfig {
    /// Fixed chunk length in seconds; the final remainder is zero-padded.
    pub chunk_s: f64,
    /// Metadata frame length in seconds (label source resolution).
    pub frame_s: f64,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        Self {
            chunk_s: 5.0,
            frame_s: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub features: FeatureConfig,
    pub codec: CodecConfig,
    pub augment: AugmentConfig,
    pub sim: SimConfig,
    pub eval: EvalConfig,
    pub chunk: ChunkConfig,
}

impl PipelineConfig {
    /// Hex SHA-256 of the canonical JSON encoding; embedded in every
    /// emitted artifact.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        let mut out = String::with_capacity(64);
        for b in digest {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut cur = vec![i + 1];
        for (j, cb) in b.iter().enumerate() {
            let cost = if ca == cb { 0 } else { 1 };
            cur.push((prev[j] + cost).min(prev[j + 1] + 1).min(cur[j] + 1));
        }
        prev = cur;
    }
    prev[b.len()]
}

fn suggest(key: &str, known: &[&str]) -> Option<String> {
    known
        .iter()
        .map(|k| (levenshtein(key, k), *k))
        .filter(|(d, _)| *d <= 2)
        .min_by_key(|(d, _)| *d)
        .map(|(_, k)| k.to_string())
}

fn known_keys(table: &str) -> Vec<&'static str> {
    match table {
        "" => vec!["seed", "features", "codec", "augment", "sim", "eval", "chunk"],
        "features" => vec!["sample_rate", "n_fft", "hop", "n_mels", "f_min", "f_max"],
        "codec" => vec!["tracks", "classes", "lambda", "threshold"],
        "augment" => vec!["chains", "pool", "depth_lo", "depth_hi", "alpha", "ranges"],
        "augment.ranges" => vec![
            "cutout_max_rects",
            "cutout_max_frac",
            "max_time_masks",
            "max_freq_masks",
            "mask_max_width_frac",
            "shift_max",
            "mixup_alpha",
        ],
        "sim" => vec![
            "variant",
            "clip_count",
            "clip_s",
            "n_events",
            "polyphony_cap",
            "snr_db_lo",
            "snr_db_hi",
            "moving_prob",
            "max_retries",
            "frame_s",
            "gain_db",
        ],
        "eval" => vec!["frames_per_segment", "threshold_deg"],
        "chunk" => vec!["chunk_s", "frame_s"],
        _ => vec![],
    }
}

fn check_keys(value: &toml::Value, prefix: &str) -> Result<()> {
    if let toml::Value::Table(table) = value {
        let known = known_keys(prefix);
        for (key, sub) in table {
            if !known.is_empty() && !known.contains(&key.as_str()) {
                let full = if prefix.is_empty() {
                    key.clone()
                } else {
                    format!("{prefix}.{key}")
                };
                return Err(CliError::UnknownKey {
                    key: full,
                    suggestion: suggest(key, &known),
                });
            }
            let child = if prefix.is_empty() {
                key.clone()
            } else {
                format!("{prefix}.{key}")
            };
            check_keys(sub, &child)?;
        }
    }
    Ok(())
}

/// Apply one `a.b.c=value` override onto a TOML tree. The value text is
/// parsed as TOML, so strings need quotes and numbers are bare.
fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{spec}` is not key=value")))?;
    let parsed: toml::Value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .map_err(|e| CliError::Config(format!("override `{spec}`: {e}")))?
        .remove("v")
        .expect("just inserted");
    let mut node = root;
    let parts: Vec<&str> = path.trim().split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override `{spec}`: `{part}` is not a table")))?;
        if i == parts.len() - 1 {
            table.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    unreachable!("loop returns on the last part")
}

/// Defaults, file, overrides — later layers win key by key.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<PipelineConfig> {
    let mut tree = match path {
        None => toml::Value::Table(toml::Table::new()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            text.parse::<toml::Value>()
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
    };
    for spec in overrides {
        apply_override(&mut tree, spec)?;
    }
    check_keys(&tree, "")?;
    let text = toml::to_string(&tree).map_err(|e| CliError::Config(e.to_string()))?;
    toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))
}
