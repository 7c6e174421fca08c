//! Bounded worker pool shared by batch subcommands. Size comes from the
//! `SELD_WORKERS` environment variable when set, otherwise rayon's default
//! (the CPU count). Items are independent and results keep input order, so
//! parallel output is identical to serial output.

use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::error::{CliError, Result};

pub const WORKERS_ENV: &str = "SELD_WORKERS";

pub fn pool() -> Result<ThreadPool> {
    let mut builder = ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(WORKERS_ENV) {
        let n: usize = raw
            .parse()
            .map_err(|_| CliError::Invalid(format!("{WORKERS_ENV}={raw} is not a worker count")))?;
        if n == 0 {
            return Err(CliError::Invalid(format!(
                "{WORKERS_ENV} must be at least 1"
            )));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::Invalid(format!("worker pool: {e}")))
}
