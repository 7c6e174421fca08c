//! Room impulse-response storage: one directory per room, holding 4-channel
//! IR WAVs, ambience WAVs, and a `room.json` sidecar naming each response's
//! position and the trajectory orderings for moving sources.
//!
//! ```text
//! srirs/
//!   room0/
//!     room.json
//!     irs/p000.wav ...
//!     ambience/amb0.wav ...
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use seld_core::dsp::FoaClip;
use seld_core::sim::{Srir, SrirSet};

use crate::error::{CliError, Result};
use crate::wav::read_foa_wav;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrDescriptor {
    pub file: String,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    #[serde(default = "default_distance")]
    pub distance_m: f64,
}

fn default_distance() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomDescriptor {
    pub room: String,
    pub irs: Vec<IrDescriptor>,
    #[serde(default)]
    pub trajectories: Vec<Vec<usize>>,
    #[serde(default)]
    pub ambience: Vec<String>,
}

/// A loaded room: its impulse responses plus any ambience recordings.
#[derive(Debug, Clone)]
pub struct Room {
    pub name: String,
    pub set: SrirSet,
    pub ambience: Vec<FoaClip>,
}

pub fn load_room(dir: &Path, sample_rate: u32) -> Result<Room> {
    let sidecar = dir.join("room.json");
    let text = std::fs::read_to_string(&sidecar).map_err(|e| CliError::io(&sidecar, e))?;
    let desc: RoomDescriptor = serde_json::from_str(&text)
        .map_err(|e| CliError::blob(&sidecar, format!("sidecar: {e}")))?;
    let mut srirs = Vec::with_capacity(desc.irs.len());
    for ir in &desc.irs {
        let path = dir.join(&ir.file);
        let clip = read_foa_wav(&path, sample_rate)?;
        srirs.push(
            Srir::new(
                clip.samples().to_owned(),
                ir.azimuth_deg,
                ir.elevation_deg,
                ir.distance_m,
                desc.room.clone(),
                sample_rate,
            )
            .map_err(CliError::Core)?,
        );
    }
    let set = SrirSet::new(srirs, desc.trajectories.clone()).map_err(CliError::Core)?;
    let mut ambience = Vec::with_capacity(desc.ambience.len());
    for amb in &desc.ambience {
        ambience.push(read_foa_wav(&dir.join(amb), sample_rate)?);
    }
    Ok(Room {
        name: desc.room.clone(),
        set,
        ambience,
    })
}

/// Load every room under `root` (any subdirectory with a `room.json`),
/// sorted by directory name for a canonical ordering.
pub fn load_rooms(root: &Path, sample_rate: u32) -> Result<Vec<Room>> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| CliError::io(root, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.join("room.json").exists())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(CliError::Invalid(format!(
            "{}: no room directories (subdirectories holding room.json)",
            root.display()
        )));
    }
    dirs.iter().map(|d| load_room(d, sample_rate)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wav::write_foa_wav;
    use ndarray::Array2;

    fn tiny_ir(az_index: usize) -> FoaClip {
        let mut data = Array2::zeros((4, 64));
        data[[0, 0]] = 0.9;
        data[[1, 1]] = 0.5 - az_index as f64 * 0.1;
        FoaClip::new(data, 24000).unwrap()
    }

    #[test]
    fn room_layout_loads() {
        let dir = tempfile::tempdir().unwrap();
        let room = dir.path().join("room0");
        std::fs::create_dir_all(room.join("irs")).unwrap();
        std::fs::create_dir_all(room.join("ambience")).unwrap();
        for i in 0..3 {
            write_foa_wav(&tiny_ir(i), &room.join(format!("irs/p{i:03}.wav")), 24).unwrap();
        }
        write_foa_wav(&FoaClip::zeros(4800, 24000), &room.join("ambience/amb0.wav"), 16).unwrap();
        let sidecar = serde_json::json!({
            "room": "room0",
            "irs": [
                {"file": "irs/p000.wav", "azimuth_deg": 0.0, "elevation_deg": 0.0},
                {"file": "irs/p001.wav", "azimuth_deg": 45.0, "elevation_deg": 10.0, "distance_m": 2.0},
                {"file": "irs/p002.wav", "azimuth_deg": 90.0, "elevation_deg": -10.0}
            ],
            "trajectories": [[0, 1, 2]],
            "ambience": ["ambience/amb0.wav"]
        });
        std::fs::write(room.join("room.json"), sidecar.to_string()).unwrap();

        let rooms = load_rooms(dir.path(), 24000).unwrap();
        assert_eq!(rooms.len(), 1);
        assert_eq!(rooms[0].name, "room0");
        assert_eq!(rooms[0].set.srirs.len(), 3);
        assert_eq!(rooms[0].set.srirs[1].azimuth_deg, 45.0);
        assert_eq!(rooms[0].set.trajectories, vec![vec![0, 1, 2]]);
        assert_eq!(rooms[0].ambience.len(), 1);

        // a trajectory referencing a missing response is rejected
        let bad = serde_json::json!({
            "room": "room0",
            "irs": [{"file": "irs/p000.wav", "azimuth_deg": 0.0, "elevation_deg": 0.0}],
            "trajectories": [[0, 5]],
            "ambience": []
        });
        std::fs::write(room.join("room.json"), bad.to_string()).unwrap();
        assert!(load_room(&room, 24000).is_err());
    }
}
