//! Metadata CSV interchange: one row per active (frame, source) at 100 ms
//! resolution, `frame,class,source,azimuth,elevation` with integer degrees,
//! azimuth in [-180, 180) and elevation in [-90, 90].
//!
//! Rows are canonicalized (sorted by frame, class, source) on write, so
//! write-read-write is byte-identical.

use std::path::Path;

use seld_core::event::{sort_events, Event, EventList};
use seld_core::geo::azel_to_cartesian;

use crate::error::{CliError, Result};

/// Cartesian unit vector back to integer degrees, azimuth wrapped into
/// [-180, 180).
pub fn doa_to_int_degrees(doa: [f64; 3]) -> (i64, i64) {
    let el = doa[2].clamp(-1.0, 1.0).asin().to_degrees();
    let az = doa[1].atan2(doa[0]).to_degrees();
    let mut az_i = az.round() as i64;
    if az_i == 180 {
        az_i = -180;
    }
    (az_i, el.round() as i64)
}

pub fn write_metadata_csv(events: &EventList, path: &Path) -> Result<()> {
    let mut rows = events.clone();
    sort_events(&mut rows);
    let mut out = String::new();
    for e in &rows {
        let (az, el) = doa_to_int_degrees(e.doa);
        out.push_str(&format!("{},{},{},{},{}\n", e.frame, e.class, e.source, az, el));
    }
    std::fs::write(path, out).map_err(|e| CliError::io(path, e))
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    line_no: usize,
    name: &str,
    raw: &str,
) -> Result<T> {
    raw.trim()
        .parse::<T>()
        .map_err(|_| CliError::csv(path, line_no, format!("bad {name} field `{raw}`")))
}

pub fn read_metadata_csv(path: &Path) -> Result<EventList> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut events = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 5 {
            return Err(CliError::csv(
                path,
                line_no,
                format!("expected 5 fields, got {}", fields.len()),
            ));
        }
        let frame: usize = parse_field(path, line_no, "frame", fields[0])?;
        let class: usize = parse_field(path, line_no, "class", fields[1])?;
        let source: usize = parse_field(path, line_no, "source", fields[2])?;
        let az: i64 = parse_field(path, line_no, "azimuth", fields[3])?;
        let el: i64 = parse_field(path, line_no, "elevation", fields[4])?;
        if !(-180..180).contains(&az) {
            return Err(CliError::csv(
                path,
                line_no,
                format!("azimuth {az} outside [-180, 180)"),
            ));
        }
        if !(-90..=90).contains(&el) {
            return Err(CliError::csv(
                path,
                line_no,
                format!("elevation {el} outside [-90, 90]"),
            ));
        }
        events.push(Event {
            frame,
            class,
            source,
            doa: azel_to_cartesian(az as f64, el as f64),
        });
    }
    sort_events(&mut events);
    Ok(events)
}
