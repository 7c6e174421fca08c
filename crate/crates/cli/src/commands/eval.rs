//! `eval`: score prediction metadata against reference metadata.
//!
//! Both inputs are directories of metadata CSVs paired by file name. The
//! output is the location-sensitive detection and class-sensitive
//! localization report — error rate, F-score, localization error, and
//! localization recall — overall, per class, and (with `--group-by`) per
//! tag group, as a table on stdout and as JSON.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use seld_core::event::EventList;
use seld_core::metrics::{
    aggregate, clip_counts, report_from_counts, Averaging, ClipRecord, GroupedReport,
    MetricConfig, MetricReport, MetricValues,
};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::manifest::Manifest;
use crate::metadata::read_metadata_csv;

pub struct EvalArgs<'a> {
    pub refs_dir: &'a Path,
    pub preds_dir: &'a Path,
    /// Tag key to group by (e.g. "room"); tags come from the manifest.
    pub group_by: Option<&'a str>,
    /// Manifest carrying per-clip tags; defaults to refs_dir/manifest.json,
    /// falling back to the directory above (the dataset root).
    pub manifest: Option<&'a Path>,
    /// Where to write the JSON report, if anywhere.
    pub json_out: Option<&'a Path>,
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub config_hash: String,
    pub clips: usize,
    pub overall: MetricValues,
    pub per_class: BTreeMap<usize, MetricValues>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub groups: Option<BTreeMap<String, MetricValues>>,
}

fn list_csvs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
        .collect();
    out.sort();
    if out.is_empty() {
        return Err(CliError::Invalid(format!(
            "{}: no metadata CSV files",
            dir.display()
        )));
    }
    Ok(out)
}

/// Frames in the scored span: the largest frame index seen, rounded up to
/// whole segments so both sides agree on segment boundaries.
fn span_frames(refs: &EventList, preds: &EventList, frames_per_segment: usize) -> usize {
    let max_frame = refs
        .iter()
        .chain(preds.iter())
        .map(|e| e.frame)
        .max()
        .unwrap_or(0);
    (max_frame + 1).div_ceil(frames_per_segment) * frames_per_segment
}

fn metric_config(cfg: &PipelineConfig) -> MetricConfig {
    MetricConfig {
        frames_per_segment: cfg.eval.frames_per_segment,
        k: cfg.codec.classes,
        threshold_deg: cfg.eval.threshold_deg,
        averaging: Averaging::Macro,
    }
}

pub fn evaluate(cfg: &PipelineConfig, args: &EvalArgs) -> Result<(EvalReport, String)> {
    let ref_files = list_csvs(args.refs_dir)?;
    let mcfg = metric_config(cfg);

    // tags for grouping, keyed by clip id (csv stem); without an explicit
    // --manifest, look next to the CSVs and then at the dataset root above
    // them (the layout `simulate` writes: metadata/ beside manifest.json)
    let tags_by_id: BTreeMap<String, BTreeMap<String, String>> = if args.group_by.is_some() {
        let manifest_path = args.manifest.map(|p| p.to_path_buf()).unwrap_or_else(|| {
            let beside = args.refs_dir.join("manifest.json");
            if beside.exists() {
                beside
            } else {
                args.refs_dir.join("../manifest.json")
            }
        });
        let manifest = if manifest_path.exists() {
            Manifest::read(&manifest_path)?
        } else {
            return Err(CliError::Invalid(format!(
                "--group-by needs a manifest with tags; {} not found",
                manifest_path.display()
            )));
        };
        manifest
            .entries
            .iter()
            .map(|e| (e.id.clone(), e.tags.clone()))
            .collect()
    } else {
        BTreeMap::new()
    };

    let mut records = Vec::new();
    for ref_path in &ref_files {
        let name = ref_path.file_name().expect("listed file has a name");
        let stem = ref_path
            .file_stem()
            .expect("listed file has a stem")
            .to_string_lossy()
            .to_string();
        let pred_path = args.preds_dir.join(name);
        if !pred_path.exists() {
            return Err(CliError::Invalid(format!(
                "{}: no matching prediction file",
                pred_path.display()
            )));
        }
        let refs = read_metadata_csv(ref_path)?;
        let preds = read_metadata_csv(&pred_path)?;
        let frames = span_frames(&refs, &preds, mcfg.frames_per_segment);
        let counts = clip_counts(&refs, &preds, frames, &mcfg)?;
        let tags = tags_by_id.get(&stem).cloned().unwrap_or_default();
        records.push(ClipRecord { tags, counts });
    }

    let merged = records
        .iter()
        .fold(seld_core::metrics::ClipCounts::new(), |mut acc, r| {
            seld_core::metrics::merge_counts(&mut acc, &r.counts);
            acc
        });
    let report: MetricReport = report_from_counts(&merged, mcfg.averaging);

    let groups = match args.group_by {
        None => None,
        Some(key) => {
            let grouped: GroupedReport = aggregate(&records, key, mcfg.averaging)?;
            Some(
                grouped
                    .groups
                    .into_iter()
                    .map(|(tag, rep)| (tag, rep.overall))
                    .collect(),
            )
        }
    };

    let eval_report = EvalReport {
        config_hash: cfg.hash(),
        clips: ref_files.len(),
        overall: report.overall.clone(),
        per_class: report.per_class.clone(),
        groups,
    };
    let table = render_table(&eval_report);
    Ok((eval_report, table))
}

fn metric_row(label: &str, v: &MetricValues) -> String {
    let le = if v.le_undefined {
        "  --  ".to_string()
    } else {
        format!("{:6.1}", v.le_deg)
    };
    format!(
        "{label:<12} ER {er:5.2}   F {f:6.1}%   LE {le}°   LR {lr:6.1}%",
        er = v.er,
        f = v.f * 100.0,
        lr = v.lr * 100.0,
    )
}

fn render_table(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&metric_row("overall", &report.overall));
    out.push('\n');
    for (class, v) in &report.per_class {
        out.push_str(&metric_row(&format!("class {class}"), v));
        out.push('\n');
    }
    if let Some(groups) = &report.groups {
        for (tag, v) in groups {
            out.push_str(&metric_row(tag, v));
            out.push('\n');
        }
    }
    out
}

pub fn run(cfg: &PipelineConfig, args: &EvalArgs) -> Result<()> {
    let (report, table) = evaluate(cfg, args)?;
    print!("{table}");
    if let Some(json_path) = args.json_out {
        let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
        json.push('\n');
        std::fs::write(json_path, json).map_err(|e| CliError::io(json_path, e))?;
    }
    Ok(())
}
