//! Sample-bank manifest: a CSV of dry mono event samples.
//!
//! Columns: `class,id,path,gain_lo,gain_hi[,trim_start_s,trim_end_s[,interference]]`.
//! Paths are resolved relative to the CSV. Trim columns cut the waveform to
//! `[trim_start_s, trim_end_s)`; the interference flag (0/1) marks samples
//! that are mixed into scenes but never labeled. All referenced files are
//! read at load time, so a bad path fails here and not mid-batch.

use std::path::Path;

use seld_core::sim::{BankEntry, SampleBank};

use crate::error::{CliError, Result};
use crate::wav::read_mono_wav;

fn parse<T: std::str::FromStr>(path: &Path, line: usize, name: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse::<T>()
        .map_err(|_| CliError::csv(path, line, format!("bad {name} field `{raw}`")))
}

pub fn load_bank(csv_path: &Path, k: usize, sample_rate: u32) -> Result<SampleBank> {
    let text = std::fs::read_to_string(csv_path).map_err(|e| CliError::io(csv_path, e))?;
    let base = csv_path.parent().unwrap_or_else(|| Path::new("."));
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if !matches!(fields.len(), 5 | 7 | 8) {
            return Err(CliError::csv(
                csv_path,
                line_no,
                format!("expected 5, 7, or 8 fields, got {}", fields.len()),
            ));
        }
        let class: usize = parse(csv_path, line_no, "class", fields[0])?;
        let id = fields[1].trim().to_string();
        let wav_path = base.join(fields[2].trim());
        let gain_lo: f64 = parse(csv_path, line_no, "gain_lo", fields[3])?;
        let gain_hi: f64 = parse(csv_path, line_no, "gain_hi", fields[4])?;
        let mut samples = read_mono_wav(&wav_path, sample_rate)?;
        if fields.len() >= 7 {
            let t0: f64 = parse(csv_path, line_no, "trim_start_s", fields[5])?;
            let t1: f64 = parse(csv_path, line_no, "trim_end_s", fields[6])?;
            let a = (t0 * sample_rate as f64).round() as usize;
            let b = ((t1 * sample_rate as f64).round() as usize).min(samples.len());
            if t0 < 0.0 || t1 <= t0 || a >= samples.len() {
                return Err(CliError::csv(
                    csv_path,
                    line_no,
                    format!("trim [{t0}, {t1}) does not select any samples"),
                ));
            }
            samples = samples[a..b].to_vec();
        }
        let interference = if fields.len() == 8 {
            let flag: u8 = parse(csv_path, line_no, "interference", fields[7])?;
            flag != 0
        } else {
            false
        };
        entries.push(BankEntry {
            class,
            id,
            samples,
            gain_lo_db: gain_lo,
            gain_hi_db: gain_hi,
            interference,
        });
    }
    SampleBank::new(entries, k, sample_rate).map_err(CliError::Core)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wav::write_mono_wav;

    #[test]
    fn bank_loads_with_trim_and_interference() {
        let dir = tempfile::tempdir().unwrap();
        let wav = dir.path().join("tone.wav");
        let samples: Vec<f64> = (0..24000).map(|i| (i as f64 * 0.05).sin() * 0.4).collect();
        write_mono_wav(&samples, 24000, &wav, 16).unwrap();
        let csv = dir.path().join("bank.csv");
        std::fs::write(
            &csv,
            "# class,id,path,gain_lo,gain_hi[,trim,trim[,interference]]\n\
             0,full,tone.wav,-3,3\n\
             1,cut,tone.wav,-3,3,0.25,0.5\n\
             7,noise,tone.wav,0,0,0.0,0.1,1\n",
        )
        .unwrap();
        let bank = load_bank(&csv, 3, 24000).unwrap();
        assert_eq!(bank.entries.len(), 3);
        assert_eq!(bank.entries[0].samples.len(), 24000);
        assert_eq!(bank.entries[1].samples.len(), 6000);
        assert!(bank.entries[2].interference);
        assert_eq!(bank.entries[2].samples.len(), 2400);
    }

    #[test]
    fn bad_rows_name_their_line() {
        let dir = tempfile::tempdir().unwrap();
        let wav = dir.path().join("t.wav");
        write_mono_wav(&vec![0.1; 100], 24000, &wav, 16).unwrap();
        let csv = dir.path().join("bank.csv");
        std::fs::write(&csv, "0,a,t.wav,-3\n").unwrap();
        let err = load_bank(&csv, 3, 24000).unwrap_err().to_string();
        assert!(err.contains(":1:"), "{err}");
        std::fs::write(&csv, "0,a,missing.wav,-3,3\n").unwrap();
        assert!(load_bank(&csv, 3, 24000).is_err());
    }
}
