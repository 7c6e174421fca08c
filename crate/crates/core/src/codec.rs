//! Track-wise label codec: fixed-slot (track) encoding of event lists,
//! permutation-invariant loss with its analytic gradient, and decoding of
//! track-wise predictions back to events.
//!
//! Each of the `M` tracks is event-independent: it carries a one-hot class
//! row and a Cartesian DoA vector per frame, and any event may land in any
//! track. The loss therefore searches all track permutations per frame and
//! keeps the cheapest alignment.

use itertools::Itertools;
use ndarray::{Array3, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::event::{Event, EventList};
use crate::geo::vec_norm;

/// Probability clamp inside the binary cross-entropy.
pub const SED_CLAMP: f64 = 1e-7;

/// DoA vectors within this of unit length are stored untouched, which keeps
/// encode/decode round trips bitwise.
const UNIT_TOL: f64 = 1e-9;

/// Per-frame, per-track (SED, DoA) label pair.
///
/// Targets carry one-hot-or-zero SED rows and unit-or-zero DoA rows;
/// predictions carry probabilities and unconstrained vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackLabelTensor {
    /// frames x M x K
    pub sed: Array3<f64>,
    /// frames x M x 3
    pub doa: Array3<f64>,
}

impl TrackLabelTensor {
    pub fn new(sed: Array3<f64>, doa: Array3<f64>) -> Result<Self> {
        let (f, m, _) = sed.dim();
        let (fd, md, three) = doa.dim();
        if f != fd || m != md || three != 3 {
            return Err(Error::shape(
                format!("doa {f} x {m} x 3"),
                format!("doa {fd} x {md} x {three}"),
            ));
        }
        if m == 0 || sed.dim().2 == 0 {
            return Err(Error::param("tracks/classes", "M and K must be at least 1"));
        }
        Ok(Self { sed, doa })
    }

    pub fn zeros(frames: usize, tracks: usize, classes: usize) -> Self {
        Self {
            sed: Array3::zeros((frames, tracks, classes)),
            doa: Array3::zeros((frames, tracks, 3)),
        }
    }

    pub fn frames(&self) -> usize {
        self.sed.dim().0
    }

    pub fn tracks(&self) -> usize {
        self.sed.dim().1
    }

    pub fn classes(&self) -> usize {
        self.sed.dim().2
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.sed.dim() == other.sed.dim() && self.doa.dim() == other.doa.dim()
    }
}

/// A bijection on track indices. `mapping()[i]` is the prediction track
/// aligned with target track `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let m = mapping.len();
        let mut seen = vec![false; m];
        for &v in &mapping {
            if v >= m || seen[v] {
                return Err(Error::param("permutation", format!("{mapping:?} is not a bijection")));
            }
            seen[v] = true;
        }
        Ok(Self { mapping })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            mapping: (0..m).collect(),
        }
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }
}

/// Loss value with the permutation chosen at every frame.
#[derive(Debug, Clone)]
pub struct PitLossResult {
    /// `lambda * sed_loss + (1 - lambda) * doa_loss`.
    pub loss: f64,
    pub sed_loss: f64,
    pub doa_loss: f64,
    pub per_frame_perm: Vec<Permutation>,
}

/// Gradient of the PIT loss with respect to the prediction tensor.
#[derive(Debug, Clone)]
pub struct PitGradient {
    /// frames x M x K
    pub sed: Array3<f64>,
    /// frames x M x 3
    pub doa: Array3<f64>,
}

/// Labels plus the number of (frame, event) activations that did not fit in
/// the available tracks.
#[derive(Debug, Clone)]
pub struct EncodeResult {
    pub labels: TrackLabelTensor,
    pub dropped: usize,
}

/// Decoded events plus a count of active tracks whose DoA had zero norm.
#[derive(Debug, Clone)]
pub struct DecodeResult {
    pub events: EventList,
    pub zero_doa_warnings: usize,
}

fn normalize_if_needed(v: [f64; 3]) -> [f64; 3] {
    let n = vec_norm(v);
    if (n - 1.0).abs() <= UNIT_TOL || n == 0.0 {
        v
    } else {
        [v[0] / n, v[1] / n, v[2] / n]
    }
}

/// Encode events into track-wise targets.
///
/// Per frame, active events are sorted by (class, source) and fill tracks
/// from 0 up; events beyond track `M - 1` are dropped and counted. Events
/// must carry unit DoAs (within 1e-3) and in-range class/frame indices.
pub fn encode_labels(events: &EventList, frames: usize, m: usize, k: usize) -> Result<EncodeResult> {
    for e in events {
        let norm = vec_norm(e.doa);
        if (norm - 1.0).abs() > 1e-3 {
            return Err(Error::NonUnitDoa(norm));
        }
        if e.class >= k {
            return Err(Error::ClassOutOfRange { class: e.class, k });
        }
        if e.frame >= frames {
            return Err(Error::FrameOutOfRange {
                frame: e.frame,
                frames,
            });
        }
    }

    let mut per_frame: Vec<Vec<&Event>> = vec![Vec::new(); frames];
    for e in events {
        per_frame[e.frame].push(e);
    }

    let mut labels = TrackLabelTensor::zeros(frames, m, k);
    let mut dropped = 0;
    for (f, frame_events) in per_frame.iter_mut().enumerate() {
        frame_events.sort_by_key(|e| (e.class, e.source));
        for (track, e) in frame_events.iter().take(m).enumerate() {
            labels.sed[[f, track, e.class]] = 1.0;
            let v = normalize_if_needed(e.doa);
            for (c, &value) in v.iter().enumerate() {
                labels.doa[[f, track, c]] = value;
            }
        }
        dropped += frame_events.len().saturating_sub(m);
    }

    Ok(EncodeResult { labels, dropped })
}

/// Mean binary cross-entropy plus mean squared error of one frame under one
/// permutation, weighted by `lambda`.
fn frame_loss_parts(
    pred_sed: &ArrayView2<f64>,
    pred_doa: &ArrayView2<f64>,
    tgt_sed: &ArrayView2<f64>,
    tgt_doa: &ArrayView2<f64>,
    perm: &[usize],
) -> (f64, f64) {
    let (m, k) = tgt_sed.dim();
    let mut bce = 0.0;
    let mut mse = 0.0;
    for (i, &j) in perm.iter().enumerate() {
        for c in 0..k {
            let p = pred_sed[[j, c]].clamp(SED_CLAMP, 1.0 - SED_CLAMP);
            let y = tgt_sed[[i, c]];
            bce -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        }
        for c in 0..3 {
            let d = pred_doa[[j, c]] - tgt_doa[[i, c]];
            mse += d * d;
        }
    }
    (bce / (m * k) as f64, mse / (m * 3) as f64)
}

fn frame_best(
    pred_sed: &ArrayView2<f64>,
    pred_doa: &ArrayView2<f64>,
    tgt_sed: &ArrayView2<f64>,
    tgt_doa: &ArrayView2<f64>,
    lambda: f64,
) -> (f64, f64, Vec<usize>) {
    let m = tgt_sed.dim().0;
    let mut best_combined = f64::INFINITY;
    let mut best_bce = 0.0;
    let mut best_mse = 0.0;
    let mut best_perm = Vec::new();
    // lexicographic order with strict improvement implements the tie-break rule
    for perm in (0..m).permutations(m) {
        let (bce, mse) = frame_loss_parts(pred_sed, pred_doa, tgt_sed, tgt_doa, &perm);
        let combined = lambda * bce + (1.0 - lambda) * mse;
        if combined < best_combined {
            best_combined = combined;
            best_bce = bce;
            best_mse = mse;
            best_perm = perm;
        }
    }
    (best_bce, best_mse, best_perm)
}

fn validate_pair(pred: &TrackLabelTensor, target: &TrackLabelTensor, lambda: f64) -> Result<()> {
    if !pred.same_shape(target) {
        return Err(Error::shape(
            format!("{:?}", target.sed.dim()),
            format!("{:?}", pred.sed.dim()),
        ));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidLambda(lambda));
    }
    Ok(())
}

/// Permutation-invariant loss.
///
/// Per frame, every track permutation is scored with
/// `lambda * BCE + (1 - lambda) * MSE` (both mean-reduced over their
/// entries) and the minimum is kept; the result averages over frames.
/// Ties go to the lexicographically smallest permutation.
pub fn pit_loss(pred: &TrackLabelTensor, target: &TrackLabelTensor, lambda: f64) -> Result<PitLossResult> {
    validate_pair(pred, target, lambda)?;
    let frames = pred.frames();
    let mut sed_total = 0.0;
    let mut doa_total = 0.0;
    let mut per_frame_perm = Vec::with_capacity(frames);
    for t in 0..frames {
        let (bce, mse, perm) = frame_best(
            &pred.sed.index_axis(Axis(0), t),
            &pred.doa.index_axis(Axis(0), t),
            &target.sed.index_axis(Axis(0), t),
            &target.doa.index_axis(Axis(0), t),
            lambda,
        );
        sed_total += bce;
        doa_total += mse;
        per_frame_perm.push(Permutation { mapping: perm });
    }
    let sed_loss = sed_total / frames as f64;
    let doa_loss = doa_total / frames as f64;
    Ok(PitLossResult {
        loss: lambda * sed_loss + (1.0 - lambda) * doa_loss,
        sed_loss,
        doa_loss,
        per_frame_perm,
    })
}

/// Analytic gradient of [`pit_loss`] with each frame's argmin permutation
/// held fixed.
///
/// Entries clamped inside the BCE get a zero gradient there, matching the
/// loss's flat regions.
pub fn pit_grad(pred: &TrackLabelTensor, target: &TrackLabelTensor, lambda: f64) -> Result<PitGradient> {
    validate_pair(pred, target, lambda)?;
    let frames = pred.frames();
    let m = pred.tracks();
    let k = pred.classes();
    let mut grad = PitGradient {
        sed: Array3::zeros(pred.sed.dim()),
        doa: Array3::zeros(pred.doa.dim()),
    };
    let sed_scale = lambda / (frames * m * k) as f64;
    let doa_scale = (1.0 - lambda) / (frames * m * 3) as f64;
    for t in 0..frames {
        let (_, _, perm) = frame_best(
            &pred.sed.index_axis(Axis(0), t),
            &pred.doa.index_axis(Axis(0), t),
            &target.sed.index_axis(Axis(0), t),
            &target.doa.index_axis(Axis(0), t),
            lambda,
        );
        for (i, &j) in perm.iter().enumerate() {
            for c in 0..k {
                let p = pred.sed[[t, j, c]];
                if p <= SED_CLAMP || p >= 1.0 - SED_CLAMP {
                    continue; // flat region of the clamp
                }
                let y = target.sed[[t, i, c]];
                grad.sed[[t, j, c]] = sed_scale * (p - y) / (p * (1.0 - p));
            }
            for c in 0..3 {
                grad.doa[[t, j, c]] =
                    doa_scale * 2.0 * (pred.doa[[t, j, c]] - target.doa[[t, i, c]]);
            }
        }
    }
    Ok(grad)
}

/// Argmin permutation for a single frame, ties broken lexicographically.
pub fn best_permutation(
    pred_sed: ArrayView2<f64>,
    pred_doa: ArrayView2<f64>,
    tgt_sed: ArrayView2<f64>,
    tgt_doa: ArrayView2<f64>,
    lambda: f64,
) -> Permutation {
    let (_, _, perm) = frame_best(&pred_sed, &pred_doa, &tgt_sed, &tgt_doa, lambda);
    Permutation { mapping: perm }
}

/// Decode track-wise predictions at the given SED threshold.
///
/// Per frame and track the argmax class is emitted when its probability
/// exceeds the threshold; the source id is the track index. An active track
/// with a zero-norm DoA is decoded as-is and counted as a warning.
pub fn decode_predictions(pred: &TrackLabelTensor, threshold: f64) -> DecodeResult {
    let mut events = Vec::new();
    let mut zero_doa_warnings = 0;
    for t in 0..pred.frames() {
        for track in 0..pred.tracks() {
            let row = pred.sed.index_axis(Axis(0), t);
            let (mut best_c, mut best_p) = (0, f64::NEG_INFINITY);
            for c in 0..pred.classes() {
                if row[[track, c]] > best_p {
                    best_p = row[[track, c]];
                    best_c = c;
                }
            }
            if best_p > threshold {
                let v = [
                    pred.doa[[t, track, 0]],
                    pred.doa[[t, track, 1]],
                    pred.doa[[t, track, 2]],
                ];
                let doa = if vec_norm(v) == 0.0 {
                    zero_doa_warnings += 1;
                    v
                } else {
                    normalize_if_needed(v)
                };
                events.push(Event {
                    frame: t,
                    class: best_c,
                    source: track,
                    doa,
                });
            }
        }
    }
    DecodeResult {
        events,
        zero_doa_warnings,
    }
}
