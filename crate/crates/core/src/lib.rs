//! Core library for sound event localization and detection (SELD) tooling:
//! first-order ambisonics features, track-wise label codec with a
//! permutation-invariant loss, spatial augmentation, scene simulation, and
//! location-sensitive detection metrics.
//!
//! Everything here is deterministic given explicit seeds; no global RNG or
//! wall-clock state is consulted anywhere.

pub mod augment;
pub mod codec;
pub mod dsp;
pub mod error;
pub mod event;
pub mod geo;
pub mod metrics;
pub mod sim;

pub use error::{Error, Result};
