//! Augmentation chains over feature tensors plus spatial augmentation of
//! raw FOA clips.
//!
//! Mask-type ops (cutout, stripe masks, frequency shift) act on the
//! 7-channel feature tensor and never touch labels. Mixup combines two
//! samples and merges their label sets. Chains follow the AugMix recipe:
//! several independently sampled chains transform copies of the input, the
//! branch outputs are mixed with Dirichlet weights, and the mix is blended
//! back toward the original with a Beta-distributed skip weight.
//!
//! FOA rotation is the one waveform-domain spatial op: a signed permutation
//! of the directional channels together with the identical transform of
//! every label DoA, giving 16 rotations/reflections that leave the
//! source-observer geometry consistent.

use ndarray::{s, Array3, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Dirichlet, Distribution};
use serde::{Deserialize, Serialize};

use crate::codec::TrackLabelTensor;
use crate::dsp::{FeatureTensor, FoaClip, LOG_FLOOR};
use crate::error::{Error, Result};
use crate::event::{Event, EventList};
use crate::geo::mat_apply;

/// Op families available to the chain sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    MixupWave,
    MixupSpec,
    Cutout,
    SpecAugment,
    FreqShift,
}

/// One augmentation op with its sampled parameters. Placement randomness
/// (rectangle corners, stripe offsets, mixup weights) is drawn at apply
/// time from the caller's RNG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AugmentOp {
    MixupWave { alpha: f64 },
    MixupSpec { alpha: f64 },
    Cutout { n_rects: usize, max_frac: f64 },
    SpecAugment { n_time_masks: usize, n_freq_masks: usize, max_width_frac: f64 },
    FreqShift { shift: i64 },
}

impl AugmentOp {
    pub fn kind(&self) -> OpKind {
        match self {
            AugmentOp::MixupWave { .. } => OpKind::MixupWave,
            AugmentOp::MixupSpec { .. } => OpKind::MixupSpec,
            AugmentOp::Cutout { .. } => OpKind::Cutout,
            AugmentOp::SpecAugment { .. } => OpKind::SpecAugment,
            AugmentOp::FreqShift { .. } => OpKind::FreqShift,
        }
    }
}

/// An ordered, non-empty list of ops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentChain {
    pub ops: Vec<AugmentOp>,
}

/// Sampling ranges for op parameters. Defaults: up to 5 cutout rectangles
/// of at most a quarter of each axis, at most 2 + 2 stripe masks of at most
/// 10% of their axis, frequency shifts within +-10 bands, mixup Beta(1,1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpRanges {
    pub cutout_max_rects: usize,
    pub cutout_max_frac: f64,
    pub max_time_masks: usize,
    pub max_freq_masks: usize,
    pub mask_max_width_frac: f64,
    pub shift_max: i64,
    pub mixup_alpha: f64,
}

impl Default for OpRanges {
    fn default() -> Self {
        Self {
            cutout_max_rects: 5,
            cutout_max_frac: 0.25,
            max_time_masks: 2,
            max_freq_masks: 2,
            mask_max_width_frac: 0.10,
            shift_max: 10,
            mixup_alpha: 1.0,
        }
    }
}

/// Chain-engine configuration: the op pool, depth range, Dirichlet/Beta
/// concentration, and op parameter ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub pool: Vec<OpKind>,
    pub depth_lo: usize,
    pub depth_hi: usize,
    pub alpha: f64,
    pub ranges: OpRanges,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            pool: vec![OpKind::Cutout, OpKind::SpecAugment, OpKind::FreqShift],
            depth_lo: 1,
            depth_hi: 3,
            alpha: 1.0,
            ranges: OpRanges::default(),
        }
    }
}

/// Draw one chain: depth uniform in `[depth_lo, depth_hi]`, op kinds i.i.d.
/// uniform over the pool, parameters freshly sampled from the ranges.
pub fn sample_chain(rng: &mut ChaCha8Rng, cfg: &ChainConfig) -> Result<AugmentChain> {
    if cfg.pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    if cfg.depth_lo == 0 || cfg.depth_lo > cfg.depth_hi {
        return Err(Error::InvalidDepthRange {
            lo: cfg.depth_lo,
            hi: cfg.depth_hi,
        });
    }
    let depth = rng.gen_range(cfg.depth_lo..=cfg.depth_hi);
    let r = &cfg.ranges;
    let ops = (0..depth)
        .map(|_| {
            let kind = cfg.pool[rng.gen_range(0..cfg.pool.len())];
            match kind {
                OpKind::MixupWave => AugmentOp::MixupWave { alpha: r.mixup_alpha },
                OpKind::MixupSpec => AugmentOp::MixupSpec { alpha: r.mixup_alpha },
                OpKind::Cutout => AugmentOp::Cutout {
                    n_rects: rng.gen_range(1..=r.cutout_max_rects.max(1)),
                    max_frac: r.cutout_max_frac,
                },
                OpKind::SpecAugment => AugmentOp::SpecAugment {
                    n_time_masks: rng.gen_range(1..=r.max_time_masks.max(1)),
                    n_freq_masks: rng.gen_range(1..=r.max_freq_masks.max(1)),
                    max_width_frac: r.mask_max_width_frac,
                },
                OpKind::FreqShift => AugmentOp::FreqShift {
                    shift: rng.gen_range(-r.shift_max..=r.shift_max),
                },
            }
        })
        .collect();
    Ok(AugmentChain { ops })
}

fn axis_span(limit: usize, max_frac: f64, rng: &mut ChaCha8Rng) -> (usize, usize) {
    let max_len = ((limit as f64 * max_frac).floor() as usize).clamp(1, limit);
    let len = rng.gen_range(1..=max_len);
    let start = rng.gen_range(0..=limit - len);
    (start, len)
}

/// Zero out `n_rects` random time x mel rectangles, replacing them with the
/// per-channel mean of the input. Rectangles span all channels so the
/// inter-channel structure of masked cells stays aligned.
pub fn cutout(x: &FeatureTensor, rng: &mut ChaCha8Rng, n_rects: usize, max_frac: f64) -> FeatureTensor {
    let mut out = x.clone();
    let (channels, frames, mels) = x.data.dim();
    if n_rects == 0 || frames == 0 || mels == 0 {
        return out;
    }
    let means: Vec<f64> = (0..channels)
        .map(|c| x.data.index_axis(Axis(0), c).mean().unwrap_or(0.0))
        .collect();
    for _ in 0..n_rects {
        let (t0, tl) = axis_span(frames, max_frac, rng);
        let (m0, ml) = axis_span(mels, max_frac, rng);
        for (c, &mean) in means.iter().enumerate() {
            out.data
                .slice_mut(ndarray::s![c, t0..t0 + tl, m0..m0 + ml])
                .fill(mean);
        }
    }
    out
}

/// Stripe masks: full-height time stripes and full-width frequency stripes.
/// Log-mel channels are filled with the log floor, IV channels with zero.
pub fn spec_augment(
    x: &FeatureTensor,
    rng: &mut ChaCha8Rng,
    n_time_masks: usize,
    n_freq_masks: usize,
    max_width_frac: f64,
) -> FeatureTensor {
    let mut out = x.clone();
    let (channels, frames, mels) = x.data.dim();
    if frames == 0 || mels == 0 {
        return out;
    }
    let fill = |c: usize| if c < 4 { LOG_FLOOR.ln() } else { 0.0 };
    for _ in 0..n_time_masks {
        let (t0, tl) = axis_span(frames, max_width_frac, rng);
        for c in 0..channels {
            out.data.slice_mut(ndarray::s![c, t0..t0 + tl, ..]).fill(fill(c));
        }
    }
    for _ in 0..n_freq_masks {
        let (m0, ml) = axis_span(mels, max_width_frac, rng);
        for c in 0..channels {
            out.data.slice_mut(ndarray::s![c, .., m0..m0 + ml]).fill(fill(c));
        }
    }
    out
}

/// Shift every channel by the same signed offset along the mel axis; vacated
/// bands are zero-filled. Shifting all channels together preserves the
/// relationship between log-mel and IV cells.
pub fn freq_shift(x: &FeatureTensor, shift: i64, shift_max: i64) -> Result<FeatureTensor> {
    if shift.abs() > shift_max {
        return Err(Error::ShiftOutOfRange { shift, max: shift_max });
    }
    let (channels, frames, mels) = x.data.dim();
    let mut out = FeatureTensor {
        data: Array3::zeros((channels, frames, mels)),
    };
    for c in 0..channels {
        for t in 0..frames {
            for m in 0..mels {
                let src = m as i64 - shift;
                if src >= 0 && (src as usize) < mels {
                    out.data[[c, t, m]] = x.data[[c, t, src as usize]];
                }
            }
        }
    }
    Ok(out)
}

fn beta_sample(alpha: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    let beta = Beta::new(alpha, alpha)
        .map_err(|e| Error::param("alpha", format!("invalid Beta concentration: {e}")))?;
    Ok(beta.sample(rng))
}

/// One active (class, doa) entry with a mixing weight, used while merging
/// label sets.
#[derive(Debug, Clone, Copy)]
struct WeightedEntry {
    class: usize,
    doa: [f64; 3],
    weight: f64,
}

fn frame_entries(labels: &TrackLabelTensor, frame: usize, weight: f64) -> Vec<WeightedEntry> {
    let mut entries = Vec::new();
    for track in 0..labels.tracks() {
        let mut active = None;
        for c in 0..labels.classes() {
            if labels.sed[[frame, track, c]] > 0.5 {
                active = Some(c);
                break;
            }
        }
        if let Some(class) = active {
            entries.push(WeightedEntry {
                class,
                doa: [
                    labels.doa[[frame, track, 0]],
                    labels.doa[[frame, track, 1]],
                    labels.doa[[frame, track, 2]],
                ],
                weight,
            });
        }
    }
    entries
}

/// Merge weighted per-frame entries into a track tensor: dedupe identical
/// (class, doa) pairs keeping the larger weight, sort by weight descending,
/// keep at most M, and lay the survivors out in (class, doa) order.
fn merge_entries(
    frames: usize,
    m: usize,
    k: usize,
    mut per_frame: Vec<Vec<WeightedEntry>>,
) -> TrackLabelTensor {
    let mut out = TrackLabelTensor::zeros(frames, m, k);
    for (f, entries) in per_frame.iter_mut().enumerate() {
        entries.sort_by(|a, b| {
            b.weight
                .partial_cmp(&a.weight)
                .unwrap()
                .then(a.class.cmp(&b.class))
                .then(a.doa.partial_cmp(&b.doa).unwrap())
        });
        let mut kept: Vec<WeightedEntry> = Vec::new();
        for e in entries.iter() {
            let dup = kept.iter().any(|x| x.class == e.class && x.doa == e.doa);
            if !dup {
                kept.push(*e);
            }
            if kept.len() == m {
                break;
            }
        }
        kept.sort_by(|a, b| a.class.cmp(&b.class).then(a.doa.partial_cmp(&b.doa).unwrap()));
        for (track, e) in kept.iter().enumerate() {
            out.sed[[f, track, e.class]] = 1.0;
            for c in 0..3 {
                out.doa[[f, track, c]] = e.doa[c];
            }
        }
    }
    out
}

/// Feature-domain mixup with a forced mixing weight. Features combine
/// convexly; labels keep binary activations and take the union of both
/// event sets, dropping the lowest-weight entries when more than M remain.
pub fn mixup_spec_with_lambda(
    a: &FeatureTensor,
    la: &TrackLabelTensor,
    b: &FeatureTensor,
    lb: &TrackLabelTensor,
    lambda_m: f64,
) -> Result<(FeatureTensor, TrackLabelTensor)> {
    if a.data.dim() != b.data.dim() {
        return Err(Error::shape(
            format!("{:?}", a.data.dim()),
            format!("{:?}", b.data.dim()),
        ));
    }
    if la.sed.dim() != lb.sed.dim() {
        return Err(Error::shape(
            format!("{:?}", la.sed.dim()),
            format!("{:?}", lb.sed.dim()),
        ));
    }
    let features = FeatureTensor {
        data: &a.data * lambda_m + &b.data * (1.0 - lambda_m),
    };
    let frames = la.frames();
    let per_frame: Vec<Vec<WeightedEntry>> = (0..frames)
        .map(|f| {
            let mut e = frame_entries(la, f, lambda_m);
            e.extend(frame_entries(lb, f, 1.0 - lambda_m));
            e
        })
        .collect();
    let labels = merge_entries(frames, la.tracks(), la.classes(), per_frame);
    Ok((features, labels))
}

/// Feature-domain mixup with `lambda_m` drawn from Beta(alpha, alpha).
pub fn mixup_spec(
    a: &FeatureTensor,
    la: &TrackLabelTensor,
    b: &FeatureTensor,
    lb: &TrackLabelTensor,
    alpha: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(FeatureTensor, TrackLabelTensor)> {
    let lambda_m = beta_sample(alpha, rng)?;
    mixup_spec_with_lambda(a, la, b, lb, lambda_m)
}

/// Waveform-domain mixup with a forced weight. Sample streams combine
/// convexly; the event lists union, with per-frame polyphony capped at
/// `cap` by dropping events from the lower-weight side first.
pub fn mixup_wave_with_lambda(
    a: &FoaClip,
    ea: &EventList,
    b: &FoaClip,
    eb: &EventList,
    lambda_m: f64,
    cap: usize,
) -> Result<(FoaClip, EventList)> {
    if a.len() != b.len() || a.sample_rate() != b.sample_rate() {
        return Err(Error::shape(
            format!("clip {} samples @ {} Hz", a.len(), a.sample_rate()),
            format!("clip {} samples @ {} Hz", b.len(), b.sample_rate()),
        ));
    }
    let out = FoaClip::new(
        a.samples() * lambda_m + b.samples() * (1.0 - lambda_m),
        a.sample_rate(),
    )?;
    let (first, second) = if lambda_m >= 0.5 { (ea, eb) } else { (eb, ea) };
    let mut per_frame: std::collections::BTreeMap<usize, Vec<Event>> = std::collections::BTreeMap::new();
    for e in first.iter().chain(second.iter()) {
        let slot = per_frame.entry(e.frame).or_default();
        if slot.len() < cap {
            slot.push(*e);
        }
    }
    let mut events: EventList = per_frame.into_values().flatten().collect();
    crate::event::sort_events(&mut events);
    Ok((out, events))
}

/// Waveform-domain mixup with `lambda_m` drawn from Beta(alpha, alpha).
pub fn mixup_wave(
    a: &FoaClip,
    ea: &EventList,
    b: &FoaClip,
    eb: &EventList,
    alpha: f64,
    cap: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(FoaClip, EventList)> {
    let lambda_m = beta_sample(alpha, rng)?;
    mixup_wave_with_lambda(a, ea, b, eb, lambda_m, cap)
}

/// Apply one op to a feature/label pair. Mixup ops need `partner`.
pub fn apply_op(
    op: &AugmentOp,
    x: &FeatureTensor,
    labels: &TrackLabelTensor,
    partner: Option<(&FeatureTensor, &TrackLabelTensor)>,
    rng: &mut ChaCha8Rng,
) -> Result<(FeatureTensor, TrackLabelTensor)> {
    match op {
        AugmentOp::Cutout { n_rects, max_frac } => {
            Ok((cutout(x, rng, *n_rects, *max_frac), labels.clone()))
        }
        AugmentOp::SpecAugment {
            n_time_masks,
            n_freq_masks,
            max_width_frac,
        } => Ok((
            spec_augment(x, rng, *n_time_masks, *n_freq_masks, *max_width_frac),
            labels.clone(),
        )),
        AugmentOp::FreqShift { shift } => {
            Ok((freq_shift(x, *shift, shift.abs())?, labels.clone()))
        }
        AugmentOp::MixupSpec { alpha } => {
            let (px, pl) = partner.ok_or_else(|| {
                Error::param("partner", "spectrogram mixup needs a second sample")
            })?;
            mixup_spec(x, labels, px, pl, *alpha, rng)
        }
        AugmentOp::MixupWave { .. } => Err(Error::param(
            "op",
            "waveform mixup cannot run inside a feature-domain chain",
        )),
    }
}

/// Deterministic mixing kernel: `skip * original + (1 - skip) * sum_i
/// weights[i] * branches[i]`. Exposed separately so forced-weight tests and
/// the sampled path share one implementation.
pub fn blend_branches(
    original: &FeatureTensor,
    branches: &[FeatureTensor],
    weights: &[f64],
    skip: f64,
) -> Result<FeatureTensor> {
    if branches.len() != weights.len() {
        return Err(Error::shape(
            format!("{} weights", branches.len()),
            format!("{} weights", weights.len()),
        ));
    }
    let mut acc: Array3<f64> = Array3::zeros(original.data.dim());
    for (b, &w) in branches.iter().zip(weights) {
        if b.data.dim() != original.data.dim() {
            return Err(Error::shape(
                format!("{:?}", original.data.dim()),
                format!("{:?}", b.data.dim()),
            ));
        }
        acc = acc + &b.data * w;
    }
    Ok(FeatureTensor {
        data: &original.data * skip + acc * (1.0 - skip),
    })
}

/// Label counterpart of [`blend_branches`]: branches that kept the labels
/// bitwise intact contribute nothing new, so the common all-mask case
/// returns the input labels unchanged; otherwise entries are merged by
/// weight with polyphony capped at the track count.
pub fn blend_labels(
    original: &TrackLabelTensor,
    branch_labels: &[TrackLabelTensor],
    weights: &[f64],
    skip: f64,
) -> TrackLabelTensor {
    if branch_labels.iter().all(|l| l == original) {
        return original.clone();
    }
    let frames = original.frames();
    let per_frame: Vec<Vec<WeightedEntry>> = (0..frames)
        .map(|f| {
            let mut e = frame_entries(original, f, skip);
            for (l, &w) in branch_labels.iter().zip(weights) {
                e.extend(frame_entries(l, f, (1.0 - skip) * w));
            }
            e
        })
        .collect();
    merge_entries(frames, original.tracks(), original.classes(), per_frame)
}

/// AugMix-style application: sample `k` chains, run each on a copy of the
/// input, mix the branch outputs with Dirichlet(alpha) weights, and blend
/// with the original using a Beta(alpha, alpha) skip weight.
pub fn apply_chains(
    x: &FeatureTensor,
    labels: &TrackLabelTensor,
    k: usize,
    cfg: &ChainConfig,
    partner: Option<(&FeatureTensor, &TrackLabelTensor)>,
    rng: &mut ChaCha8Rng,
) -> Result<(FeatureTensor, TrackLabelTensor)> {
    if k == 0 {
        return Err(Error::param("k", "at least one chain is required"));
    }
    let weights: Vec<f64> = if k == 1 {
        vec![1.0]
    } else {
        let dir = Dirichlet::new(&vec![cfg.alpha; k])
            .map_err(|e| Error::param("alpha", format!("invalid Dirichlet concentration: {e}")))?;
        dir.sample(rng)
    };
    let skip = beta_sample(cfg.alpha, rng)?;

    let mut branch_feats = Vec::with_capacity(k);
    let mut branch_labels = Vec::with_capacity(k);
    for _ in 0..k {
        let chain = sample_chain(rng, cfg)?;
        let mut cur = x.clone();
        let mut cur_labels = labels.clone();
        for op in &chain.ops {
            let (nx, nl) = apply_op(op, &cur, &cur_labels, partner, rng)?;
            cur = nx;
            cur_labels = nl;
        }
        branch_feats.push(cur);
        branch_labels.push(cur_labels);
    }

    let features = blend_branches(x, &branch_feats, &weights, skip)?;
    let labels_out = blend_labels(labels, &branch_labels, &weights, skip);
    Ok((features, labels_out))
}

/// One of the 16 spatial transforms: quarter-turns about z, optionally
/// composed with an x<->y reflection and a z negation. The same matrix acts
/// on the directional channels and on label DoAs.
#[derive(Debug, Clone, PartialEq)]
pub struct FoaRotation {
    index: usize,
    matrix: [[f64; 3]; 3],
}

pub const N_ROTATIONS: usize = 16;

fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for (k, bk) in b.iter().enumerate() {
                out[i][j] += a[i][k] * bk[j];
            }
        }
    }
    out
}

impl FoaRotation {
    /// Decompose index as `r = q + 4 * swap + 8 * zneg` with q quarter-turns
    /// about z, then an optional x<->y swap, then an optional z sign flip.
    pub fn new(index: usize) -> Result<Self> {
        if index >= N_ROTATIONS {
            return Err(Error::InvalidRotationIndex(index));
        }
        let q = index % 4;
        let swap = (index / 4) % 2 == 1;
        let zneg = index / 8 == 1;
        // cos/sin of 90-degree multiples stay exact in {-1, 0, 1}
        let (c, s) = match q {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        };
        let mut m = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
        if swap {
            m = mat_mul(&[[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], &m);
        }
        if zneg {
            m = mat_mul(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]], &m);
        }
        Ok(Self { index, matrix: m })
    }

    pub fn all() -> Vec<Self> {
        (0..N_ROTATIONS).map(|r| Self::new(r).unwrap()).collect()
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn channel_matrix(&self) -> &[[f64; 3]; 3] {
        &self.matrix
    }

    /// Identical to the channel matrix: what rotates the field rotates the
    /// labels.
    pub fn label_matrix(&self) -> &[[f64; 3]; 3] {
        &self.matrix
    }
}

/// Rotate an FOA clip and its labels by rotation `r`: the omni channel is
/// untouched, the (x, y, z) channels and every event DoA get the same
/// signed-permutation matrix.
pub fn foa_rotate(clip: &FoaClip, events: &EventList, r: usize) -> Result<(FoaClip, EventList)> {
    let rot = FoaRotation::new(r)?;
    let m = rot.channel_matrix();
    let n = clip.len();
    let src = clip.samples();
    let mut out = FoaClip::zeros(n, clip.sample_rate());
    {
        let dst = out.samples_mut();
        for i in 0..n {
            dst[[0, i]] = src[[0, i]];
            let v = [src[[1, i]], src[[2, i]], src[[3, i]]];
            let w = mat_apply(m, v);
            dst[[1, i]] = w[0];
            dst[[2, i]] = w[1];
            dst[[3, i]] = w[2];
        }
    }
    let rotated_events = events
        .iter()
        .map(|e| Event {
            doa: mat_apply(m, e.doa),
            ..*e
        })
        .collect();
    Ok((out, rotated_events))
}

/// Rotate an already-extracted feature tensor and its labels by rotation
/// `r`, without going back to the waveform. The rotation matrix is a signed
/// permutation, so the dipole log-mel channels permute (a sign flip leaves
/// power untouched) while each intensity-vector cell and each label DoA get
/// the matrix itself.
pub fn rotate_features(
    feat: &FeatureTensor,
    labels: &TrackLabelTensor,
    r: usize,
) -> Result<(FeatureTensor, TrackLabelTensor)> {
    let rot = FoaRotation::new(r)?;
    let m = rot.channel_matrix();
    let (channels, frames, mels) = feat.data.dim();
    if channels != 7 {
        return Err(Error::ChannelCount {
            expected: 7,
            got: channels,
        });
    }
    let mut out = Array3::zeros((7, frames, mels));
    out.slice_mut(s![0, .., ..]).assign(&feat.data.slice(s![0, .., ..]));
    for (i, row) in m.iter().enumerate() {
        // the single nonzero column of row i names the source dipole
        let j = (0..3).find(|&j| row[j] != 0.0).expect("signed permutation row");
        out.slice_mut(s![1 + i, .., ..])
            .assign(&feat.data.slice(s![1 + j, .., ..]));
    }
    for t in 0..frames {
        for b in 0..mels {
            let v = [
                feat.data[[4, t, b]],
                feat.data[[5, t, b]],
                feat.data[[6, t, b]],
            ];
            let w = mat_apply(m, v);
            for (c, val) in w.iter().enumerate() {
                out[[4 + c, t, b]] = *val;
            }
        }
    }
    let mut rotated = labels.clone();
    for f in 0..labels.frames() {
        for track in 0..labels.tracks() {
            let v = [
                labels.doa[[f, track, 0]],
                labels.doa[[f, track, 1]],
                labels.doa[[f, track, 2]],
            ];
            let w = mat_apply(m, v);
            for (c, val) in w.iter().enumerate() {
                rotated.doa[[f, track, c]] = *val;
            }
        }
    }
    Ok((FeatureTensor { data: out }, rotated))
}
