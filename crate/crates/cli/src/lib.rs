//! Batch CLI and file formats for the SELD toolkit: dataset simulation,
//! feature extraction, augmentation, evaluation, and the self-check
//! oracles, bound together by a layered TOML configuration.
//!
//! The binary (`seld`) is a thin argument-parsing shell over this library;
//! everything here is callable directly, which is how the integration and
//! acceptance tests drive it.

pub mod bank;
pub mod commands;
pub mod config;
pub mod error;
pub mod features_io;
pub mod manifest;
pub mod metadata;
pub mod oracle;
pub mod srir_io;
pub mod wav;
pub mod workers;

pub use error::{CliError, Result};
