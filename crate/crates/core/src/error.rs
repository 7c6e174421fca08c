//! Error type shared by all core modules.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors reported by core operations.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("expected {expected} channels, got {got}")]
    ChannelCount { expected: usize, got: usize },

    #[error("sample rate must be positive, got {0}")]
    InvalidSampleRate(u32),

    #[error("sample rate mismatch: {a} Hz vs {b} Hz")]
    SampleRateMismatch { a: u32, b: u32 },

    #[error("clip has {len} samples, shorter than one window of {n_fft}")]
    ClipTooShort { len: usize, n_fft: usize },

    #[error("n_fft must be a power of two, got {0}")]
    NotPowerOfTwo(usize),

    #[error("hop must satisfy 0 < hop <= n_fft, got hop={hop}, n_fft={n_fft}")]
    InvalidHop { hop: usize, n_fft: usize },

    #[error("invalid mel frequency range: f_min={f_min}, f_max={f_max}, nyquist={nyquist}")]
    InvalidFreqRange {
        f_min: f64,
        f_max: f64,
        nyquist: f64,
    },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("DoA vector is not unit length: norm={0}")]
    NonUnitDoa(f64),

    #[error("class index {class} out of range for {k} classes")]
    ClassOutOfRange { class: usize, k: usize },

    #[error("frame index {frame} out of range for {frames} frames")]
    FrameOutOfRange { frame: usize, frames: usize },

    #[error("loss weight must be in [0, 1], got {0}")]
    InvalidLambda(f64),

    #[error("augmentation pool is empty")]
    EmptyPool,

    #[error("invalid chain depth range [{lo}, {hi}]")]
    InvalidDepthRange { lo: usize, hi: usize },

    #[error("frequency shift {shift} exceeds maximum {max}")]
    ShiftOutOfRange { shift: i64, max: i64 },

    #[error("rotation index {0} out of range 0..16")]
    InvalidRotationIndex(usize),

    #[error("scene plan infeasible: {0}")]
    InfeasiblePlan(String),

    #[error("operand has zero power, SNR undefined")]
    ZeroPower,

    #[error("events are silent but a finite SNR of {0} dB was requested")]
    SilentEvents(f64),

    #[error("clip duration mismatch: event frame {frame} beyond {frames} frames")]
    DurationMismatch { frame: usize, frames: usize },

    #[error("clip is missing required tag `{0}`")]
    MissingTag(String),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },
}

impl Error {
    pub(crate) fn shape(expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            expected: expected.into(),
            got: got.into(),
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}
