//! On-disk fixtures for end-to-end tests: a small tone sample bank, a pair
//! of synthetic rooms with short impulse responses and ambience, and a
//! compact pipeline configuration sized for fast runs.

use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seld_cli::config::PipelineConfig;
use seld_cli::wav::{write_foa_wav, write_mono_wav};
use seld_core::dsp::FoaClip;

pub const RATE: u32 = 24_000;

/// Write `k` dry tone samples plus one interference sample; return the CSV
/// path.
pub fn make_bank(dir: &Path, k: usize) -> std::path::PathBuf {
    let mut csv = String::new();
    for c in 0..k {
        let len = 7200 + c * 2400; // 0.3 s .. longer
        let freq = 300.0 + 180.0 * c as f64;
        let samples: Vec<f64> = (0..len)
            .map(|i| {
                let t = i as f64 / RATE as f64;
                (2.0 * std::f64::consts::PI * freq * t).sin() * 0.35
            })
            .collect();
        let name = format!("tone{c}.wav");
        write_mono_wav(&samples, RATE, &dir.join(&name), 16).unwrap();
        csv.push_str(&format!("{c},tone{c},{name},-3,3\n"));
    }
    // one interference sample: audible, never labeled
    let hiss: Vec<f64> = {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        (0..4800).map(|_| rng.gen_range(-0.1..0.1)).collect()
    };
    write_mono_wav(&hiss, RATE, &dir.join("hiss.wav"), 16).unwrap();
    csv.push_str(&format!("{k},hiss,hiss.wav,-6,0,0.0,0.2,1\n"));
    let csv_path = dir.join("bank.csv");
    std::fs::write(&csv_path, csv).unwrap();
    csv_path
}

fn make_ir(rng: &mut ChaCha8Rng, taps: usize) -> FoaClip {
    let mut data = Array2::zeros((4, taps));
    for ch in 0..4 {
        for j in 0..taps {
            // crude decaying random reflections
            let decay = (-(j as f64) / taps as f64 * 4.0).exp();
            data[[ch, j]] = rng.gen_range(-0.5..0.5) * decay;
        }
    }
    data[[0, 0]] = 0.8; // strong direct path on the omni channel
    FoaClip::new(data, RATE).unwrap()
}

/// Build `n_rooms` room directories under `root`, each with 4 impulse
/// responses, one trajectory, and a noise ambience bed.
pub fn make_rooms(root: &Path, n_rooms: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for r in 0..n_rooms {
        let room = root.join(format!("room{r}"));
        std::fs::create_dir_all(room.join("irs")).unwrap();
        std::fs::create_dir_all(room.join("ambience")).unwrap();
        let positions = [(0.0, 0.0), (60.0, 20.0), (-120.0, -10.0), (150.0, 35.0)];
        let mut irs = Vec::new();
        for (i, (az, el)) in positions.iter().enumerate() {
            let ir = make_ir(&mut rng, 96);
            let file = format!("irs/p{i:03}.wav");
            write_foa_wav(&ir, &room.join(&file), 24).unwrap();
            irs.push(serde_json::json!({
                "file": file,
                "azimuth_deg": az,
                "elevation_deg": el,
                "distance_m": 1.5,
            }));
        }
        let mut amb = Array2::zeros((4, RATE as usize));
        for v in amb.iter_mut() {
            *v = rng.gen_range(-0.05..0.05);
        }
        write_foa_wav(
            &FoaClip::new(amb, RATE).unwrap(),
            &room.join("ambience/amb0.wav"),
            16,
        )
        .unwrap();
        let sidecar = serde_json::json!({
            "room": format!("room{r}"),
            "irs": irs,
            "trajectories": [[0, 1, 2, 3]],
            "ambience": ["ambience/amb0.wav"],
        });
        std::fs::write(room.join("room.json"), sidecar.to_string()).unwrap();
    }
}

/// A pipeline configuration sized for test speed: short clips, 1 s chunks,
/// few classes.
pub fn small_config() -> PipelineConfig {
    let mut cfg = PipelineConfig {
        seed: 11,
        ..PipelineConfig::default()
    };
    cfg.codec.classes = 3;
    cfg.sim.clip_count = 2;
    cfg.sim.clip_s = 2.0;
    cfg.sim.n_events = 3;
    cfg.sim.moving_prob = 0.5;
    cfg.chunk.chunk_s = 1.0;
    cfg
}

/// Recursively collect relative paths of files under `dir` matching a
/// suffix filter.
#[allow(dead_code)] // each test target compiles this module separately
pub fn files_with_suffix(dir: &Path, suffix: &str) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.to_string_lossy().ends_with(suffix) {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

/// Assert two directory trees hold byte-identical files for a suffix.
#[allow(dead_code)] // each test target compiles this module separately
pub fn assert_trees_match(a: &Path, b: &Path, suffix: &str) {
    let fa = files_with_suffix(a, suffix);
    let fb = files_with_suffix(b, suffix);
    assert_eq!(fa, fb, "{suffix} file sets differ");
    assert!(!fa.is_empty(), "no {suffix} files produced");
    for rel in &fa {
        let ba = std::fs::read(a.join(rel)).unwrap();
        let bb = std::fs::read(b.join(rel)).unwrap();
        assert_eq!(ba, bb, "{} differs between runs", rel.display());
    }
}
