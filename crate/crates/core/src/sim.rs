//! Scene synthesis: spatialize dry mono samples through measured FOA room
//! impulse responses, place them on a timeline under a polyphony cap, mix
//! room ambience at an exact target SNR, and emit frame-level metadata.
//!
//! Static sources get one FFT convolution. Moving sources are rendered
//! block-wise: 2048-sample blocks at 50% overlap, each windowed with an
//! equal-power crossfade (the squared windows sum to one at every sample)
//! and convolved with the impulse response of its trajectory position.
//!
//! The SNR gain is solved in closed form over the active-event region, so
//! the measured ratio equals the target by construction rather than by
//! iteration.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dsp::FoaClip;
use crate::error::{Error, Result};
use crate::event::{sort_events, Event, EventList};
use crate::geo::azel_to_cartesian;

/// Block length for moving-source rendering.
pub const BLOCK_LEN: usize = 2048;
/// Hop between blocks: 50% overlap.
pub const BLOCK_HOP: usize = BLOCK_LEN / 2;

/// Equal-power analysis window: `sin(pi (i + 0.5) / len)`. Windows one hop
/// apart satisfy w^2(i) + w^2(i + hop) = 1 exactly.
pub fn crossfade_window(i: usize, len: usize) -> f64 {
    (std::f64::consts::PI * (i as f64 + 0.5) / len as f64).sin()
}

/// A first-order-ambisonics room impulse response measured at one source
/// position.
#[derive(Debug, Clone, PartialEq)]
pub struct Srir {
    /// 4 x taps.
    pub ir: Array2<f64>,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub distance_m: f64,
    pub room: String,
    pub sample_rate: u32,
}

impl Srir {
    pub fn new(
        ir: Array2<f64>,
        azimuth_deg: f64,
        elevation_deg: f64,
        distance_m: f64,
        room: impl Into<String>,
        sample_rate: u32,
    ) -> Result<Self> {
        let (channels, taps) = ir.dim();
        if channels != 4 {
            return Err(Error::ChannelCount {
                expected: 4,
                got: channels,
            });
        }
        if taps == 0 {
            return Err(Error::param("ir", "impulse response must have taps"));
        }
        if !ir.iter().all(|v| v.is_finite()) {
            return Err(Error::param("ir", "impulse response has non-finite taps"));
        }
        if !(-180.0..=180.0).contains(&azimuth_deg) || !(-90.0..=90.0).contains(&elevation_deg) {
            return Err(Error::param(
                "position",
                format!("({azimuth_deg}, {elevation_deg}) outside [-180,180] x [-90,90]"),
            ));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidSampleRate(sample_rate));
        }
        Ok(Self {
            ir,
            azimuth_deg,
            elevation_deg,
            distance_m,
            room: room.into(),
            sample_rate,
        })
    }

    pub fn taps(&self) -> usize {
        self.ir.dim().1
    }
}

/// The impulse responses of one room plus its moving-source trajectories
/// (each an ordered list of indexes into `srirs`).
#[derive(Debug, Clone, PartialEq)]
pub struct SrirSet {
    pub srirs: Vec<Srir>,
    pub trajectories: Vec<Vec<usize>>,
}

impl SrirSet {
    pub fn new(srirs: Vec<Srir>, trajectories: Vec<Vec<usize>>) -> Result<Self> {
        if srirs.is_empty() {
            return Err(Error::EmptyPool);
        }
        let rate = srirs[0].sample_rate;
        if srirs.iter().any(|s| s.sample_rate != rate) {
            return Err(Error::SampleRateMismatch {
                a: rate,
                b: srirs.iter().find(|s| s.sample_rate != rate).unwrap().sample_rate,
            });
        }
        for t in &trajectories {
            if t.is_empty() {
                return Err(Error::param("trajectory", "empty trajectory"));
            }
            if let Some(&bad) = t.iter().find(|&&i| i >= srirs.len()) {
                return Err(Error::param(
                    "trajectory",
                    format!("index {bad} out of range for {} responses", srirs.len()),
                ));
            }
        }
        Ok(Self { srirs, trajectories })
    }

    pub fn sample_rate(&self) -> u32 {
        self.srirs[0].sample_rate
    }
}

/// One dry sample: a mono waveform with its class and mixing-gain range.
#[derive(Debug, Clone, PartialEq)]
pub struct BankEntry {
    pub class: usize,
    pub id: String,
    pub samples: Vec<f64>,
    pub gain_lo_db: f64,
    pub gain_hi_db: f64,
    /// Interference samples are audible but never labeled, and their
    /// polyphony is uncapped.
    pub interference: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBank {
    pub entries: Vec<BankEntry>,
    pub k: usize,
    pub sample_rate: u32,
}

impl SampleBank {
    pub fn new(entries: Vec<BankEntry>, k: usize, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidSampleRate(sample_rate));
        }
        for e in &entries {
            if !e.interference && e.class >= k {
                return Err(Error::ClassOutOfRange { class: e.class, k });
            }
            if e.samples.is_empty() {
                return Err(Error::param("bank", format!("sample {} is empty", e.id)));
            }
            if !(e.gain_lo_db.is_finite() && e.gain_hi_db.is_finite()) || e.gain_lo_db > e.gain_hi_db {
                return Err(Error::param(
                    "bank",
                    format!("sample {} has invalid gain range", e.id),
                ));
            }
        }
        Ok(Self {
            entries,
            k,
            sample_rate,
        })
    }
}

fn fft_round_trip(
    planner: &mut FftPlanner<f64>,
    x_spec: &[Complex64],
    h_spec: &[Complex64],
) -> Vec<Complex64> {
    let len = x_spec.len();
    let mut prod: Vec<Complex64> = x_spec.iter().zip(h_spec).map(|(a, b)| a * b).collect();
    let inv = planner.plan_fft_inverse(len);
    inv.process(&mut prod);
    let scale = 1.0 / len as f64;
    for v in prod.iter_mut() {
        *v *= scale;
    }
    prod
}

fn forward(planner: &mut FftPlanner<f64>, x: &[f64], len: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(len, Complex64::new(0.0, 0.0));
    planner.plan_fft_forward(len).process(&mut buf);
    buf
}

/// Spatialize a dry mono sample through a static impulse response. The
/// output carries the full convolution tail: `N + taps - 1` samples.
pub fn convolve_srir(sample: &[f64], sample_rate: u32, srir: &Srir) -> Result<FoaClip> {
    if sample_rate != srir.sample_rate {
        return Err(Error::SampleRateMismatch {
            a: sample_rate,
            b: srir.sample_rate,
        });
    }
    if sample.is_empty() {
        return Err(Error::param("sample", "empty waveform"));
    }
    let n = sample.len();
    let taps = srir.taps();
    let out_len = n + taps - 1;
    let fft_len = out_len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let x_spec = forward(&mut planner, sample, fft_len);
    let mut out = Array2::zeros((4, out_len));
    for ch in 0..4 {
        let h: Vec<f64> = (0..taps).map(|j| srir.ir[[ch, j]]).collect();
        let h_spec = forward(&mut planner, &h, fft_len);
        let y = fft_round_trip(&mut planner, &x_spec, &h_spec);
        for i in 0..out_len {
            out[[ch, i]] = y[i].re;
        }
    }
    FoaClip::new(out, sample_rate)
}

fn block_ir_index(start: i64, n: usize, t: usize) -> usize {
    let center = (start + BLOCK_HOP as i64).clamp(0, n as i64 - 1) as usize;
    ((center * t) / n).min(t - 1)
}

/// Spatialize a moving source: overlapping equal-power-windowed blocks,
/// each convolved with the impulse response of its trajectory position.
pub fn convolve_srir_moving(sample: &[f64], sample_rate: u32, irs: &[&Srir]) -> Result<FoaClip> {
    if irs.is_empty() {
        return Err(Error::EmptyPool);
    }
    for srir in irs {
        if srir.sample_rate != sample_rate {
            return Err(Error::SampleRateMismatch {
                a: sample_rate,
                b: srir.sample_rate,
            });
        }
    }
    if sample.is_empty() {
        return Err(Error::param("sample", "empty waveform"));
    }
    let n = sample.len();
    let t = irs.len();
    let l_max = irs.iter().map(|s| s.taps()).max().unwrap();
    let out_len = n + l_max - 1;
    let fft_len = (BLOCK_LEN + l_max - 1).next_power_of_two();
    let mut planner = FftPlanner::new();
    // per-trajectory-position spectra, computed on first use
    let mut spectra: Vec<Option<Vec<Vec<Complex64>>>> = vec![None; t];
    let mut out = Array2::<f64>::zeros((4, out_len));

    let mut b: i64 = -1;
    loop {
        let start = b * BLOCK_HOP as i64;
        if start >= n as i64 {
            break;
        }
        b += 1;
        let mut seg = vec![0.0f64; BLOCK_LEN];
        let mut any = false;
        for (i, slot) in seg.iter_mut().enumerate() {
            let src = start + i as i64;
            if src >= 0 && (src as usize) < n {
                *slot = sample[src as usize] * crossfade_window(i, BLOCK_LEN);
                any = true;
            }
        }
        if !any {
            continue;
        }
        let idx = block_ir_index(start, n, t);
        if spectra[idx].is_none() {
            let srir = irs[idx];
            let per_ch = (0..4)
                .map(|ch| {
                    let h: Vec<f64> = (0..srir.taps()).map(|j| srir.ir[[ch, j]]).collect();
                    forward(&mut planner, &h, fft_len)
                })
                .collect();
            spectra[idx] = Some(per_ch);
        }
        let x_spec = forward(&mut planner, &seg, fft_len);
        let h_specs = spectra[idx].as_ref().unwrap();
        let block_out = BLOCK_LEN + irs[idx].taps() - 1;
        for ch in 0..4 {
            let y = fft_round_trip(&mut planner, &x_spec, &h_specs[ch]);
            for (j, v) in y.iter().take(block_out).enumerate() {
                let pos = start + j as i64;
                if pos >= 0 && (pos as usize) < out_len {
                    out[[ch, pos as usize]] += v.re;
                }
            }
        }
    }
    FoaClip::new(out, sample_rate)
}

/// `10 log10(signal_power / noise_power)` in dB.
pub fn measure_snr(signal_power: f64, noise_power: f64) -> Result<f64> {
    if signal_power <= 0.0 || noise_power <= 0.0 {
        return Err(Error::ZeroPower);
    }
    Ok(10.0 * (signal_power / noise_power).log10())
}

/// Where one placement sits in space: a fixed response or an ordered walk
/// along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Spatial {
    Static(usize),
    Moving(Vec<usize>),
}

/// One placed event instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    /// Index into the sample bank.
    pub entry: usize,
    pub class: usize,
    pub source: usize,
    pub onset_s: f64,
    pub gain_db: f64,
    pub spatial: Spatial,
    pub interference: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePlan {
    pub duration_s: f64,
    pub snr_db: f64,
    /// Metadata frame length in seconds.
    pub frame_s: f64,
    pub placements: Vec<Placement>,
}

/// Scene-planning parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub duration_s: f64,
    pub n_events: usize,
    pub polyphony_cap: usize,
    pub snr_db_lo: f64,
    pub snr_db_hi: f64,
    pub moving_prob: f64,
    pub max_retries: usize,
    pub frame_s: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            duration_s: 60.0,
            n_events: 14,
            polyphony_cap: 3,
            snr_db_lo: 6.0,
            snr_db_hi: 30.0,
            moving_prob: 0.25,
            max_retries: 100,
            frame_s: 0.1,
        }
    }
}

fn frames_overlapped(onset_s: f64, len_s: f64, frame_s: f64, n_frames: usize) -> Vec<usize> {
    (0..n_frames)
        .filter(|&f| {
            let t0 = f as f64 * frame_s;
            let t1 = t0 + frame_s;
            onset_s < t1 && onset_s + len_s > t0
        })
        .collect()
}

/// Draw a timeline: onsets uniform over the clip, rejected and redrawn while
/// they would push target-class polyphony past the cap. Deterministic for a
/// given RNG state.
pub fn plan_scene(
    bank: &SampleBank,
    set: &SrirSet,
    cfg: &SceneConfig,
    rng: &mut ChaCha8Rng,
) -> Result<ScenePlan> {
    if bank.entries.is_empty() {
        return Err(Error::EmptyPool);
    }
    if cfg.duration_s <= 0.0 || cfg.frame_s <= 0.0 {
        return Err(Error::param("duration", "clip and frame lengths must be positive"));
    }
    let rate = bank.sample_rate as f64;
    let n_frames = (cfg.duration_s / cfg.frame_s).round() as usize;
    let snr_db = rng.gen_range(cfg.snr_db_lo..=cfg.snr_db_hi);
    let mut polyphony = vec![0usize; n_frames];
    let mut placements = Vec::with_capacity(cfg.n_events);

    for _ in 0..cfg.n_events {
        let mut placed = false;
        for _ in 0..cfg.max_retries.max(1) {
            let entry_idx = rng.gen_range(0..bank.entries.len());
            let entry = &bank.entries[entry_idx];
            let len_s = entry.samples.len() as f64 / rate;
            if len_s > cfg.duration_s {
                continue;
            }
            let max_onset = cfg.duration_s - len_s;
            let onset_s = if max_onset > 0.0 {
                rng.gen_range(0.0..max_onset)
            } else {
                0.0
            };
            let frames = frames_overlapped(onset_s, len_s, cfg.frame_s, n_frames);
            if !entry.interference && frames.iter().any(|&f| polyphony[f] >= cfg.polyphony_cap) {
                continue;
            }
            if !entry.interference {
                for &f in &frames {
                    polyphony[f] += 1;
                }
            }
            let gain_db = rng.gen_range(entry.gain_lo_db..=entry.gain_hi_db);
            let spatial = if !set.trajectories.is_empty() && rng.gen_bool(cfg.moving_prob) {
                Spatial::Moving(set.trajectories[rng.gen_range(0..set.trajectories.len())].clone())
            } else {
                Spatial::Static(rng.gen_range(0..set.srirs.len()))
            };
            placements.push(Placement {
                entry: entry_idx,
                class: entry.class,
                source: placements.len(),
                onset_s,
                gain_db,
                spatial,
                interference: entry.interference,
            });
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::InfeasiblePlan(format!(
                "could not place event {} of {} under polyphony cap {} in {} s",
                placements.len() + 1,
                cfg.n_events,
                cfg.polyphony_cap,
                cfg.duration_s
            )));
        }
    }
    Ok(ScenePlan {
        duration_s: cfg.duration_s,
        snr_db,
        frame_s: cfg.frame_s,
        placements,
    })
}

/// Rendered scene: the mixture, its metadata, and the mixing bookkeeping.
#[derive(Debug, Clone)]
pub struct MixOutput {
    pub clip: FoaClip,
    pub events: EventList,
    pub stats: MixStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixStats {
    /// Mean event-mix power over the active-event region.
    pub event_power: f64,
    /// Mean ambience power over the same region, before scaling.
    pub noise_power: f64,
    /// Scale applied to the ambience, when ambience was mixed.
    pub noise_gain: Option<f64>,
    /// Target SNR actually applied; equals the plan's draw.
    pub snr_db: Option<f64>,
}

fn placement_len_s(bank: &SampleBank, p: &Placement) -> f64 {
    bank.entries[p.entry].samples.len() as f64 / bank.sample_rate as f64
}

fn trajectory_position<'a>(set: &'a SrirSet, traj: &[usize], progress: f64) -> &'a Srir {
    let t = traj.len();
    let idx = ((progress * t as f64).floor() as i64).clamp(0, t as i64 - 1) as usize;
    &set.srirs[traj[idx]]
}

/// Loop or truncate ambience to exactly `n` samples, crossfading seams.
fn tile_ambience(amb: &FoaClip, n: usize) -> Array2<f64> {
    let src = amb.samples();
    let len = amb.len();
    let mut out = Array2::zeros((4, n));
    if len >= n {
        out.assign(&src.slice(ndarray::s![.., 0..n]));
        return out;
    }
    let xf = 1024.min(len / 2).max(1);
    let mut pos = 0usize;
    while pos < n {
        let take = len.min(n - pos);
        for ch in 0..4 {
            for i in 0..take {
                let mut v = src[[ch, i]];
                if pos > 0 && i < xf {
                    // linear seam crossfade against the previous copy's tail
                    let a = i as f64 / xf as f64;
                    v = v * a + out[[ch, pos + i]] * (1.0 - a);
                }
                out[[ch, pos + i]] = v;
            }
        }
        pos += take.max(1);
    }
    out
}

/// Render a plan: spatialize and sum every placement (tails truncated at
/// the clip edge), derive frame metadata for non-interference events, and
/// mix ambience at the exact target SNR when provided. An empty plan with
/// ambience passes the ambience through unscaled, since no event power
/// exists to define a ratio.
pub fn mix_scene(
    plan: &ScenePlan,
    bank: &SampleBank,
    set: &SrirSet,
    ambience: Option<&FoaClip>,
) -> Result<MixOutput> {
    let rate = bank.sample_rate;
    if set.sample_rate() != rate {
        return Err(Error::SampleRateMismatch {
            a: rate,
            b: set.sample_rate(),
        });
    }
    if plan.duration_s <= 0.0 || plan.frame_s <= 0.0 {
        return Err(Error::param("plan", "non-positive duration or frame length"));
    }
    let n = (plan.duration_s * rate as f64).round() as usize;
    let n_frames = (plan.duration_s / plan.frame_s).round() as usize;

    let mut mix = Array2::<f64>::zeros((4, n));
    let mut events: EventList = Vec::new();
    for p in &plan.placements {
        let entry = bank
            .entries
            .get(p.entry)
            .ok_or_else(|| Error::param("placement", format!("entry {} out of range", p.entry)))?;
        let len_s = placement_len_s(bank, p);
        if p.onset_s < 0.0 || p.onset_s + len_s > plan.duration_s + 1e-9 {
            return Err(Error::InfeasiblePlan(format!(
                "event at {:.3} s with length {:.3} s exceeds the {:.3} s clip",
                p.onset_s, len_s, plan.duration_s
            )));
        }
        let gain = 10f64.powf(p.gain_db / 20.0);
        let scaled: Vec<f64> = entry.samples.iter().map(|s| s * gain).collect();
        let seg = match &p.spatial {
            Spatial::Static(i) => {
                let srir = set
                    .srirs
                    .get(*i)
                    .ok_or_else(|| Error::param("placement", format!("response {i} out of range")))?;
                convolve_srir(&scaled, rate, srir)?
            }
            Spatial::Moving(traj) => {
                let irs: Vec<&Srir> = traj
                    .iter()
                    .map(|&i| {
                        set.srirs.get(i).ok_or_else(|| {
                            Error::param("placement", format!("response {i} out of range"))
                        })
                    })
                    .collect::<Result<_>>()?;
                convolve_srir_moving(&scaled, rate, &irs)?
            }
        };
        let onset = (p.onset_s * rate as f64).round() as usize;
        for ch in 0..4 {
            for i in 0..seg.len() {
                if onset + i < n {
                    mix[[ch, onset + i]] += seg.samples()[[ch, i]];
                }
            }
        }

        if !p.interference {
            for f in frames_overlapped(p.onset_s, len_s, plan.frame_s, n_frames) {
                let (az, el) = match &p.spatial {
                    Spatial::Static(i) => {
                        let s = &set.srirs[*i];
                        (s.azimuth_deg, s.elevation_deg)
                    }
                    Spatial::Moving(traj) => {
                        let progress = (f as f64 * plan.frame_s - p.onset_s) / len_s;
                        let s = trajectory_position(set, traj, progress.max(0.0));
                        (s.azimuth_deg, s.elevation_deg)
                    }
                };
                events.push(Event {
                    frame: f,
                    class: p.class,
                    source: p.source,
                    doa: azel_to_cartesian(az, el),
                });
            }
        }
    }
    sort_events(&mut events);

    // active region: any placement (labeled or interference) sounding
    let mut active = vec![false; n];
    for p in &plan.placements {
        let len_s = placement_len_s(bank, p);
        for f in frames_overlapped(p.onset_s, len_s, plan.frame_s, n_frames) {
            let a = (f as f64 * plan.frame_s * rate as f64).round() as usize;
            let b = (((f + 1) as f64 * plan.frame_s * rate as f64).round() as usize).min(n);
            for slot in active.iter_mut().take(b).skip(a) {
                *slot = true;
            }
        }
    }
    let active_count = active.iter().filter(|&&a| a).count();
    let mut event_power = 0.0;
    for (i, &is_active) in active.iter().enumerate() {
        if is_active {
            for ch in 0..4 {
                event_power += mix[[ch, i]] * mix[[ch, i]];
            }
        }
    }
    if active_count > 0 {
        event_power /= (4 * active_count) as f64;
    }

    let stats = match ambience {
        None => MixStats {
            event_power,
            noise_power: 0.0,
            noise_gain: None,
            snr_db: None,
        },
        Some(amb) => {
            if amb.sample_rate() != rate {
                return Err(Error::SampleRateMismatch {
                    a: rate,
                    b: amb.sample_rate(),
                });
            }
            let noise = tile_ambience(amb, n);
            if plan.placements.is_empty() {
                // nothing to reference an SNR against: pass ambience through
                mix += &noise;
                MixStats {
                    event_power: 0.0,
                    noise_power: 0.0,
                    noise_gain: Some(1.0),
                    snr_db: None,
                }
            } else {
                if event_power <= 0.0 {
                    return Err(Error::SilentEvents(plan.snr_db));
                }
                let mut noise_power = 0.0;
                for (i, &is_active) in active.iter().enumerate() {
                    if is_active {
                        for ch in 0..4 {
                            noise_power += noise[[ch, i]] * noise[[ch, i]];
                        }
                    }
                }
                noise_power /= (4 * active_count) as f64;
                if noise_power <= 0.0 {
                    return Err(Error::ZeroPower);
                }
                // g solves 10 log10(Pe / (g^2 Pn)) = snr exactly
                let gain = (event_power / (noise_power * 10f64.powf(plan.snr_db / 10.0))).sqrt();
                mix += &(&noise * gain);
                MixStats {
                    event_power,
                    noise_power,
                    noise_gain: Some(gain),
                    snr_db: Some(plan.snr_db),
                }
            }
        }
    };

    Ok(MixOutput {
        clip: FoaClip::new(mix, rate)?,
        events,
        stats,
    })
}
