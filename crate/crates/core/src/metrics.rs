//! Location-sensitive detection metrics: error rate and F-score under a
//! spatial threshold, plus class-dependent localization error and recall.
//!
//! Events are pooled into one-second segments. Within a segment, each
//! (class, source) pair contributes one DoA — the renormalized mean of its
//! active frames — and references are matched to predictions per class with
//! an optimal (Hungarian) assignment on angular distance. A matched pair
//! within the threshold is a true positive; matched pairs beyond it count
//! as both a false positive and a false negative but still feed the
//! localization-error average, which is defined over all matched pairs.
//!
//! Counts pool additively across segments, clips, and groups; every ratio
//! is computed from pooled counts, never averaged from per-clip ratios.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::EventList;
use crate::geo::{vec_dot, vec_norm};

/// Angular distance between two unit vectors, in degrees.
///
/// Computed as atan2(|u x v|, u . v) — identical in value to
/// arccos(clamp(u . v)) but exact for coincident vectors and stable near 0
/// and 180 degrees.
pub fn angular_distance(u: [f64; 3], v: [f64; 3]) -> Result<f64> {
    for w in [u, v] {
        let n = vec_norm(w);
        if (n - 1.0).abs() > 1e-6 {
            return Err(Error::NonUnitDoa(n));
        }
    }
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    Ok(vec_norm(cross).atan2(vec_dot(u, v)).to_degrees())
}

/// Minimum-cost assignment of rows to columns (shortest augmenting path
/// with potentials, O(n^3)). Returns, per row, the column it was assigned
/// or `None`; exactly `min(rows, cols)` rows receive a column, and the sum
/// of their costs is minimal among all such assignments.
pub fn min_cost_assignment(cost: &Array2<f64>) -> Vec<Option<usize>> {
    let (rows, cols) = cost.dim();
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    if rows > cols {
        // solve the transpose so every row of the smaller side is assigned
        let t = Array2::from_shape_fn((cols, rows), |(i, j)| cost[[j, i]]);
        let col_to_row = min_cost_assignment(&t);
        let mut out = vec![None; rows];
        for (c, r) in col_to_row.into_iter().enumerate() {
            if let Some(r) = r {
                out[r] = Some(c);
            }
        }
        return out;
    }

    let n = rows;
    let m = cols;
    // 1-indexed potentials; p[j] is the row matched to column j (0 = free)
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; rows];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = Some(j - 1);
        }
    }
    out
}

/// Per-(segment, class) DoA sets for one side (references or predictions).
#[derive(Debug, Clone, Default)]
pub struct SegmentView {
    n_segments: usize,
    doas: BTreeMap<(usize, usize), Vec<[f64; 3]>>,
}

impl SegmentView {
    pub fn n_segments(&self) -> usize {
        self.n_segments
    }

    /// DoAs active for `class` in `segment`; one entry per distinct source.
    pub fn doas(&self, segment: usize, class: usize) -> &[[f64; 3]] {
        self.doas.get(&(segment, class)).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Pool events into segments: each (class, source) active anywhere in a
/// segment appears once, carrying the renormalized mean of its frame DoAs.
pub fn segment_events(
    events: &EventList,
    n_frames: usize,
    frames_per_segment: usize,
    k: usize,
) -> Result<SegmentView> {
    if frames_per_segment == 0 {
        return Err(Error::param("frames_per_segment", "must be positive"));
    }
    let n_segments = n_frames.div_ceil(frames_per_segment);
    // (segment, class, source) -> running DoA sum and frame count
    let mut sums: BTreeMap<(usize, usize, usize), ([f64; 3], usize)> = BTreeMap::new();
    for e in events {
        if e.frame >= n_frames {
            return Err(Error::DurationMismatch {
                frame: e.frame,
                frames: n_frames,
            });
        }
        if e.class >= k {
            return Err(Error::ClassOutOfRange { class: e.class, k });
        }
        let norm = vec_norm(e.doa);
        if (norm - 1.0).abs() > 1e-3 {
            return Err(Error::NonUnitDoa(norm));
        }
        let seg = e.frame / frames_per_segment;
        let entry = sums.entry((seg, e.class, e.source)).or_insert(([0.0; 3], 0));
        for c in 0..3 {
            entry.0[c] += e.doa[c];
        }
        entry.1 += 1;
    }
    let mut doas: BTreeMap<(usize, usize), Vec<[f64; 3]>> = BTreeMap::new();
    for ((seg, class, _source), (sum, count)) in sums {
        let mean = [
            sum[0] / count as f64,
            sum[1] / count as f64,
            sum[2] / count as f64,
        ];
        let norm = vec_norm(mean);
        if norm < 1e-12 {
            return Err(Error::NonUnitDoa(norm));
        }
        doas.entry((seg, class))
            .or_default()
            .push([mean[0] / norm, mean[1] / norm, mean[2] / norm]);
    }
    Ok(SegmentView { n_segments, doas })
}

/// Confusion counts for one (segment, class) cell.
#[derive(Debug, Clone, Default)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    pub fn_count: usize,
    /// Angular errors of all matched pairs, threshold or not.
    pub matched_errors_deg: Vec<f64>,
}

/// Match one class's references against predictions within a segment using
/// the optimal assignment on angular distance.
pub fn match_segment(refs: &[[f64; 3]], preds: &[[f64; 3]], threshold_deg: f64) -> Result<MatchResult> {
    let cost = Array2::from_shape_fn((refs.len(), preds.len()), |(i, j)| {
        // validated again below; placeholder keeps construction infallible
        angular_distance(refs[i], preds[j]).unwrap_or(f64::NAN)
    });
    for i in 0..refs.len() {
        for j in 0..preds.len() {
            if cost[[i, j]].is_nan() {
                angular_distance(refs[i], preds[j])?;
            }
        }
    }
    let assignment = min_cost_assignment(&cost);
    let mut result = MatchResult::default();
    let mut matched_preds = 0usize;
    for (r, c) in assignment.iter().enumerate() {
        if let Some(c) = *c {
            let err = cost[[r, c]];
            result.matched_errors_deg.push(err);
            matched_preds += 1;
            if err <= threshold_deg {
                result.tp += 1;
            } else {
                // a pairing this bad is simultaneously a spurious detection
                // and a miss
                result.fp += 1;
                result.fn_count += 1;
            }
        } else {
            result.fn_count += 1;
        }
    }
    result.fp += preds.len() - matched_preds;
    Ok(result)
}

/// Additive per-class counts; every published ratio derives from these.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    /// Reference DoAs over all segments (N for the error rate).
    pub refs: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_count: usize,
    /// Per-segment substitutions, deletions, insertions, summed.
    pub subs: usize,
    pub dels: usize,
    pub ins: usize,
    /// Matched pairs regardless of threshold, with their error sum.
    pub matched: usize,
    pub error_sum_deg: f64,
}

impl ClassCounts {
    pub fn add(&mut self, other: &Self) {
        self.refs += other.refs;
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_count += other.fn_count;
        self.subs += other.subs;
        self.dels += other.dels;
        self.ins += other.ins;
        self.matched += other.matched;
        self.error_sum_deg += other.error_sum_deg;
    }
}

/// Per-class pooled counts for one clip (or any pooled collection).
pub type ClipCounts = BTreeMap<usize, ClassCounts>;

/// Add `from` into `into`, class by class.
pub fn merge_counts(into: &mut ClipCounts, from: &ClipCounts) {
    for (class, counts) in from {
        into.entry(*class).or_default().add(counts);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    Macro,
    Micro,
}

/// Metric parameters; the segment length is expressed in label frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub frames_per_segment: usize,
    pub k: usize,
    pub threshold_deg: f64,
    pub averaging: Averaging,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            frames_per_segment: 10,
            k: 13,
            threshold_deg: 20.0,
            averaging: Averaging::Macro,
        }
    }
}

/// The four headline numbers. `le_deg` is 180 with `le_undefined` set when
/// no matched pair exists to define it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub er: f64,
    pub f: f64,
    pub le_deg: f64,
    pub le_undefined: bool,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub overall: MetricValues,
    pub per_class: BTreeMap<usize, MetricValues>,
}

/// Count confusions for one clip. Classes appear in the result when they
/// have any reference or prediction activity.
pub fn clip_counts(
    refs: &EventList,
    preds: &EventList,
    n_frames: usize,
    cfg: &MetricConfig,
) -> Result<ClipCounts> {
    let ref_view = segment_events(refs, n_frames, cfg.frames_per_segment, cfg.k)?;
    let pred_view = segment_events(preds, n_frames, cfg.frames_per_segment, cfg.k)?;
    let n_segments = ref_view.n_segments().max(pred_view.n_segments());
    let mut counts = ClipCounts::new();
    for seg in 0..n_segments {
        for class in 0..cfg.k {
            let r = ref_view.doas(seg, class);
            let p = pred_view.doas(seg, class);
            if r.is_empty() && p.is_empty() {
                continue;
            }
            let m = match_segment(r, p, cfg.threshold_deg)?;
            let c = counts.entry(class).or_default();
            c.refs += r.len();
            c.tp += m.tp;
            c.fp += m.fp;
            c.fn_count += m.fn_count;
            let s = m.fp.min(m.fn_count);
            c.subs += s;
            c.dels += m.fn_count - s;
            c.ins += m.fp - s;
            c.matched += m.matched_errors_deg.len();
            c.error_sum_deg += m.matched_errors_deg.iter().sum::<f64>();
        }
    }
    Ok(counts)
}

fn values_from_counts(c: &ClassCounts) -> MetricValues {
    let er = (c.subs + c.dels + c.ins) as f64 / c.refs.max(1) as f64;
    let denom = 2 * c.tp + c.fp + c.fn_count;
    let f = if denom == 0 { 0.0 } else { 2.0 * c.tp as f64 / denom as f64 };
    let (le_deg, le_undefined) = if c.matched > 0 {
        (c.error_sum_deg / c.matched as f64, false)
    } else {
        (180.0, true)
    };
    let lr = if c.refs > 0 { c.matched as f64 / c.refs as f64 } else { 0.0 };
    MetricValues {
        er,
        f,
        le_deg,
        le_undefined,
        lr,
    }
}

/// Derive a report from pooled counts. Macro averages give each class with
/// references equal weight (localization error additionally requires at
/// least one matched pair); micro pools counts across classes first.
pub fn report_from_counts(counts: &ClipCounts, averaging: Averaging) -> MetricReport {
    let per_class: BTreeMap<usize, MetricValues> = counts
        .iter()
        .map(|(class, c)| (*class, values_from_counts(c)))
        .collect();

    let overall = match averaging {
        Averaging::Micro => {
            let mut pooled = ClassCounts::default();
            for c in counts.values() {
                pooled.add(c);
            }
            values_from_counts(&pooled)
        }
        Averaging::Macro => {
            let scored: Vec<(&usize, &ClassCounts)> =
                counts.iter().filter(|(_, c)| c.refs > 0).collect();
            if scored.is_empty() {
                MetricValues {
                    er: 0.0,
                    f: 0.0,
                    le_deg: 180.0,
                    le_undefined: true,
                    lr: 0.0,
                }
            } else {
                let n = scored.len() as f64;
                let mut er = 0.0;
                let mut f = 0.0;
                let mut lr = 0.0;
                let mut le_sum = 0.0;
                let mut le_n = 0usize;
                for (_, c) in &scored {
                    let v = values_from_counts(c);
                    er += v.er;
                    f += v.f;
                    lr += v.lr;
                    if !v.le_undefined {
                        le_sum += v.le_deg;
                        le_n += 1;
                    }
                }
                let (le_deg, le_undefined) = if le_n > 0 {
                    (le_sum / le_n as f64, false)
                } else {
                    (180.0, true)
                };
                MetricValues {
                    er: er / n,
                    f: f / n,
                    le_deg,
                    le_undefined,
                    lr: lr / n,
                }
            }
        }
    };
    MetricReport { overall, per_class }
}

/// Full per-clip metric computation.
pub fn compute_metrics(
    refs: &EventList,
    preds: &EventList,
    n_frames: usize,
    cfg: &MetricConfig,
) -> Result<MetricReport> {
    Ok(report_from_counts(
        &clip_counts(refs, preds, n_frames, cfg)?,
        cfg.averaging,
    ))
}

/// One evaluated clip: its pooled counts plus free-form tags (room, fold,
/// split) used for grouping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub tags: BTreeMap<String, String>,
    pub counts: ClipCounts,
}

/// Reports pooled over every clip and per group value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedReport {
    pub overall: MetricReport,
    pub groups: BTreeMap<String, MetricReport>,
}

/// Aggregate per-clip counts by a tag: counts pool before any ratio is
/// formed. Every clip must carry the tag.
pub fn aggregate(records: &[ClipRecord], group_by: &str, averaging: Averaging) -> Result<GroupedReport> {
    let mut all = ClipCounts::new();
    let mut per_group: BTreeMap<String, ClipCounts> = BTreeMap::new();
    for record in records {
        let value = record
            .tags
            .get(group_by)
            .ok_or_else(|| Error::MissingTag(group_by.to_string()))?;
        merge_counts(&mut all, &record.counts);
        merge_counts(per_group.entry(value.clone()).or_default(), &record.counts);
    }
    Ok(GroupedReport {
        overall: report_from_counts(&all, averaging),
        groups: per_group
            .into_iter()
            .map(|(g, c)| (g, report_from_counts(&c, averaging)))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignment_on_identity_costs() {
        let cost = Array2::from_shape_vec((2, 2), vec![0.0, 10.0, 10.0, 0.0]).unwrap();
        assert_eq!(min_cost_assignment(&cost), vec![Some(0), Some(1)]);
        let cost = Array2::from_shape_vec((2, 2), vec![10.0, 0.0, 0.0, 10.0]).unwrap();
        assert_eq!(min_cost_assignment(&cost), vec![Some(1), Some(0)]);
    }

    #[test]
    fn assignment_handles_rectangles_and_empties() {
        let cost = Array2::from_shape_vec((1, 3), vec![5.0, 1.0, 9.0]).unwrap();
        assert_eq!(min_cost_assignment(&cost), vec![Some(1)]);
        let cost = Array2::from_shape_vec((3, 1), vec![5.0, 1.0, 9.0]).unwrap();
        assert_eq!(min_cost_assignment(&cost), vec![None, Some(0), None]);
        let empty = Array2::<f64>::zeros((0, 4));
        assert!(min_cost_assignment(&empty).is_empty());
        let empty = Array2::<f64>::zeros((2, 0));
        assert_eq!(min_cost_assignment(&empty), vec![None, None]);
    }

    #[test]
    fn exact_match_is_all_true_positives() {
        let refs = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let m = match_segment(&refs, &refs, 20.0).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_count), (2, 0, 0));
        assert!(m.matched_errors_deg.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn empty_sides() {
        let refs = [[1.0, 0.0, 0.0]];
        let m = match_segment(&refs, &[], 20.0).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_count), (0, 0, 1));
        let m = match_segment(&[], &refs, 20.0).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_count), (0, 1, 0));
    }

    #[test]
    fn empty_event_lists_give_empty_view() {
        let view = segment_events(&vec![], 100, 10, 4).unwrap();
        assert_eq!(view.n_segments(), 10);
        assert!(view.doas(0, 0).is_empty());
    }
}
