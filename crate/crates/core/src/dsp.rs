//! FOA feature extraction: STFT, mel filterbank, log-mel spectrograms and
//! mel-space intensity vectors.
//!
//! Conventions (fixed so frame counts and values are testable):
//! - periodic Hann window, no center padding,
//!   `frames = (len - n_fft) / hop + 1`
//! - Slaney mel scale, f_min 20 Hz, f_max 12 kHz, no area normalization
//! - power clamped at [`LOG_FLOOR`] before the natural log
//! - intensity vectors unit-normalized per time-mel cell

use ndarray::{Array2, Array3, ArrayView1};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Power clamp applied before the log, prevents -inf on silence.
pub const LOG_FLOOR: f64 = 1e-10;

/// Additive epsilon in the intensity-vector normalizer.
pub const IV_NORM_EPS: f64 = 1e-10;

/// Cells whose raw intensity norm falls below this are zeroed outright.
const IV_ZERO_GUARD: f64 = 1e-12;

/// Channel layout of [`FeatureTensor`].
pub const FEATURE_CHANNELS: [&str; 7] = [
    "logmel_w", "logmel_x", "logmel_y", "logmel_z", "iv_x", "iv_y", "iv_z",
];

/// A 4-channel time-domain FOA recording, channels ordered (w, x, y, z).
#[derive(Debug, Clone, PartialEq)]
pub struct FoaClip {
    samples: Array2<f64>,
    sample_rate: u32,
}

impl FoaClip {
    /// Wrap a 4xN sample array. Rejects wrong channel counts and a zero rate.
    pub fn new(samples: Array2<f64>, sample_rate: u32) -> Result<Self> {
        if samples.nrows() != 4 {
            return Err(Error::ChannelCount {
                expected: 4,
                got: samples.nrows(),
            });
        }
        if sample_rate == 0 {
            return Err(Error::InvalidSampleRate(sample_rate));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        Self {
            samples: Array2::zeros((4, len)),
            sample_rate,
        }
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut Array2<f64> {
        &mut self.samples
    }

    pub fn channel(&self, idx: usize) -> ArrayView1<'_, f64> {
        self.samples.row(idx)
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }
}

/// Encode a mono signal as an FOA plane wave arriving from `direction`.
///
/// The omni channel carries the signal, the dipole channels carry the signal
/// scaled by the direction components.
pub fn encode_plane_wave(direction: [f64; 3], signal: &[f64], sample_rate: u32) -> Result<FoaClip> {
    let mut samples = Array2::zeros((4, signal.len()));
    for (i, &s) in signal.iter().enumerate() {
        samples[[0, i]] = s;
        samples[[1, i]] = direction[0] * s;
        samples[[2, i]] = direction[1] * s;
        samples[[3, i]] = direction[2] * s;
    }
    FoaClip::new(samples, sample_rate)
}

/// Analysis window shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Periodic Hann: `0.5 - 0.5 cos(2 pi n / N)`.
    Hann,
    Rectangular,
}

impl Window {
    fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
                .collect(),
            Window::Rectangular => vec![1.0; n],
        }
    }
}

/// Per-channel complex STFT bins: channels x frames x (n_fft/2 + 1).
#[derive(Debug, Clone)]
pub struct ComplexSpectrogram {
    pub bins: Array3<Complex64>,
    pub n_fft: usize,
    pub hop: usize,
}

impl ComplexSpectrogram {
    pub fn channels(&self) -> usize {
        self.bins.dim().0
    }

    pub fn frames(&self) -> usize {
        self.bins.dim().1
    }

    pub fn n_bins(&self) -> usize {
        self.bins.dim().2
    }
}

/// Number of analysis frames for a signal of `len` samples.
pub fn frame_count(len: usize, n_fft: usize, hop: usize) -> usize {
    if len < n_fft {
        0
    } else {
        (len - n_fft) / hop + 1
    }
}

/// Short-time Fourier transform of all four channels.
///
/// Frames start at multiples of `hop` with no padding; a clip shorter than
/// one window is rejected.
pub fn stft(clip: &FoaClip, n_fft: usize, hop: usize, window: Window) -> Result<ComplexSpectrogram> {
    if !n_fft.is_power_of_two() || n_fft == 0 {
        return Err(Error::NotPowerOfTwo(n_fft));
    }
    if hop == 0 || hop > n_fft {
        return Err(Error::InvalidHop { hop, n_fft });
    }
    if clip.len() < n_fft {
        return Err(Error::ClipTooShort {
            len: clip.len(),
            n_fft,
        });
    }

    let frames = frame_count(clip.len(), n_fft, hop);
    let n_bins = n_fft / 2 + 1;
    let win = window.coefficients(n_fft);

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n_fft);
    let mut buf = vec![Complex64::default(); n_fft];
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];

    let mut bins = Array3::zeros((clip.samples().nrows(), frames, n_bins));
    for ch in 0..clip.samples().nrows() {
        let samples = clip.channel(ch);
        for t in 0..frames {
            let start = t * hop;
            for i in 0..n_fft {
                buf[i] = Complex64::new(samples[start + i] * win[i], 0.0);
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for (k, v) in buf[..n_bins].iter().enumerate() {
                bins[[ch, t, k]] = *v;
            }
        }
    }

    Ok(ComplexSpectrogram { bins, n_fft, hop })
}

/// Triangular mel filterbank: n_mels x (n_fft/2 + 1).
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    pub weights: Array2<f64>,
    pub sample_rate: u32,
    pub n_fft: usize,
    pub f_min: f64,
    pub f_max: f64,
}

impl MelFilterbank {
    pub fn n_mels(&self) -> usize {
        self.weights.nrows()
    }

    /// Apex frequency of each triangle, in Hz.
    pub fn center_frequencies(&self) -> Vec<f64> {
        let n_mels = self.n_mels();
        let mel_lo = hz_to_mel(self.f_min);
        let mel_hi = hz_to_mel(self.f_max);
        (0..n_mels)
            .map(|m| {
                mel_to_hz(mel_lo + (mel_hi - mel_lo) * (m + 1) as f64 / (n_mels + 1) as f64)
            })
            .collect()
    }
}

/// Slaney mel scale: linear below 1 kHz, logarithmic above.
pub fn hz_to_mel(hz: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_HZ: f64 = 1000.0;
    if hz < MIN_LOG_HZ {
        hz / F_SP
    } else {
        let logstep = 6.4f64.ln() / 27.0;
        MIN_LOG_HZ / F_SP + (hz / MIN_LOG_HZ).ln() / logstep
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_MEL: f64 = 15.0; // 1000 Hz / F_SP
    if mel < MIN_LOG_MEL {
        mel * F_SP
    } else {
        let logstep = 6.4f64.ln() / 27.0;
        1000.0 * ((mel - MIN_LOG_MEL) * logstep).exp()
    }
}

/// Build a Slaney-style triangular filterbank without area normalization.
pub fn mel_filterbank(
    sample_rate: u32,
    n_fft: usize,
    n_mels: usize,
    f_min: f64,
    f_max: f64,
) -> Result<MelFilterbank> {
    let nyquist = sample_rate as f64 / 2.0;
    if !(0.0..nyquist).contains(&f_min) || f_max <= f_min || f_max > nyquist {
        return Err(Error::InvalidFreqRange {
            f_min,
            f_max,
            nyquist,
        });
    }
    if n_mels == 0 {
        return Err(Error::param("n_mels", "must be at least 1"));
    }

    let n_bins = n_fft / 2 + 1;
    let mel_lo = hz_to_mel(f_min);
    let mel_hi = hz_to_mel(f_max);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();

    let mut weights = Array2::zeros((n_mels, n_bins));
    for m in 0..n_mels {
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        for k in 0..n_bins {
            let f = k as f64 * sample_rate as f64 / n_fft as f64;
            let rising = if mid > lo { (f - lo) / (mid - lo) } else { 0.0 };
            let falling = if hi > mid { (hi - f) / (hi - mid) } else { 0.0 };
            let w = rising.min(falling).max(0.0);
            if w > 0.0 {
                weights[[m, k]] = w;
            }
        }
    }

    Ok(MelFilterbank {
        weights,
        sample_rate,
        n_fft,
        f_min,
        f_max,
    })
}

fn check_fb_match(spec: &ComplexSpectrogram, fb: &MelFilterbank) -> Result<()> {
    if fb.n_fft != spec.n_fft || fb.weights.ncols() != spec.n_bins() {
        return Err(Error::shape(
            format!("filterbank for n_fft {}", spec.n_fft),
            format!("filterbank for n_fft {}", fb.n_fft),
        ));
    }
    Ok(())
}

/// Log power in mel space: `ln(max(fb . |spec|^2, LOG_FLOOR))`.
///
/// Output shape is channels x frames x n_mels.
pub fn logmel(spec: &ComplexSpectrogram, fb: &MelFilterbank) -> Result<Array3<f64>> {
    check_fb_match(spec, fb)?;
    let (channels, frames, n_bins) = spec.bins.dim();
    let n_mels = fb.n_mels();
    let mut out = Array3::zeros((channels, frames, n_mels));
    let mut power = vec![0.0f64; n_bins];
    for ch in 0..channels {
        for t in 0..frames {
            for (k, slot) in power.iter_mut().enumerate() {
                *slot = spec.bins[[ch, t, k]].norm_sqr();
            }
            for m in 0..n_mels {
                let row = fb.weights.row(m);
                let p: f64 = row
                    .iter()
                    .zip(power.iter())
                    .map(|(w, p)| w * p)
                    .sum();
                out[[ch, t, m]] = p.max(LOG_FLOOR).ln();
            }
        }
    }
    Ok(out)
}

/// Mel-space acoustic intensity vectors, unit-normalized per cell.
///
/// Per time-frequency cell `I = Re(conj(W) . [X, Y, Z])`, projected through
/// the filterbank and then divided by its own norm. Cells with near-zero
/// intensity come out as exact zero vectors.
pub fn intensity_vectors(spec: &ComplexSpectrogram, fb: &MelFilterbank) -> Result<Array3<f64>> {
    if spec.channels() != 4 {
        return Err(Error::ChannelCount {
            expected: 4,
            got: spec.channels(),
        });
    }
    check_fb_match(spec, fb)?;
    let (_, frames, n_bins) = spec.bins.dim();
    let n_mels = fb.n_mels();
    let mut out = Array3::zeros((3, frames, n_mels));
    let mut raw = Array2::zeros((3, n_bins));
    for t in 0..frames {
        for k in 0..n_bins {
            let w = spec.bins[[0, t, k]].conj();
            for c in 0..3 {
                raw[[c, k]] = (w * spec.bins[[c + 1, t, k]]).re;
            }
        }
        for m in 0..n_mels {
            let row = fb.weights.row(m);
            let mut v = [0.0f64; 3];
            for (c, slot) in v.iter_mut().enumerate() {
                *slot = row
                    .iter()
                    .zip(raw.row(c).iter())
                    .map(|(w, i)| w * i)
                    .sum();
            }
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if norm >= IV_ZERO_GUARD {
                for c in 0..3 {
                    out[[c, t, m]] = v[c] / (norm + IV_NORM_EPS);
                }
            }
        }
    }
    Ok(out)
}

/// Feature extraction parameters. Defaults follow the toolkit's reference
/// configuration: 24 kHz, 1024-point FFT, hop 400, 128 mel bins.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate: 24000,
            n_fft: 1024,
            hop: 400,
            n_mels: 128,
            f_min: 20.0,
            f_max: 12000.0,
        }
    }
}

/// 7 x frames x n_mels feature stack: 4 log-mel channels then 3 IV channels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub data: Array3<f64>,
}

impl FeatureTensor {
    pub fn frames(&self) -> usize {
        self.data.dim().1
    }

    pub fn n_mels(&self) -> usize {
        self.data.dim().2
    }

    pub fn logmel_channels(&self) -> ndarray::ArrayView3<'_, f64> {
        self.data.slice(ndarray::s![0..4, .., ..])
    }

    /// The three IV channels as a view starting at channel 4.
    pub fn iv_channels(&self) -> ndarray::ArrayView3<'_, f64> {
        self.data.slice(ndarray::s![4..7, .., ..])
    }
}

/// Full feature pipeline: Hann STFT, log-mel on all four channels, intensity
/// vectors, stacked as a 7-channel tensor.
pub fn extract_features(clip: &FoaClip, config: &FeatureConfig) -> Result<FeatureTensor> {
    if clip.sample_rate() != config.sample_rate {
        return Err(Error::SampleRateMismatch {
            a: clip.sample_rate(),
            b: config.sample_rate,
        });
    }
    let spec = stft(clip, config.n_fft, config.hop, Window::Hann)?;
    let fb = mel_filterbank(
        config.sample_rate,
        config.n_fft,
        config.n_mels,
        config.f_min,
        config.f_max,
    )?;
    let lm = logmel(&spec, &fb)?;
    let iv = intensity_vectors(&spec, &fb)?;

    let frames = spec.frames();
    let mut data = Array3::zeros((7, frames, config.n_mels));
    data.slice_mut(ndarray::s![0..4, .., ..]).assign(&lm);
    data.slice_mut(ndarray::s![4..7, .., ..]).assign(&iv);
    Ok(FeatureTensor { data })
}

/// Mean power (mel-projected magnitude squared) of the omni channel, used as
/// an energy weight for direction estimates.
pub fn mel_power(spec: &ComplexSpectrogram, fb: &MelFilterbank, channel: usize) -> Result<Array2<f64>> {
    check_fb_match(spec, fb)?;
    let (_, frames, n_bins) = spec.bins.dim();
    let n_mels = fb.n_mels();
    let mut out = Array2::zeros((frames, n_mels));
    for t in 0..frames {
        for m in 0..n_mels {
            let row = fb.weights.row(m);
            out[[t, m]] = (0..n_bins)
                .map(|k| row[k] * spec.bins[[channel, t, k]].norm_sqr())
                .sum();
        }
    }
    Ok(out)
}
