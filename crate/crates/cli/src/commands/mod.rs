//! Subcommand implementations.

pub mod augment;
pub mod eval;
pub mod featurize;
pub mod rotations;
pub mod selfcheck;
pub mod simulate;
