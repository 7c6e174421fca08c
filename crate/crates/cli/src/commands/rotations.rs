//! `rotations`: print the 16-element spatial rotation set — each entry's
//! index, its channel matrix (applied to the x/y/z dipole channels), and
//! the identical label matrix — as text or JSON.

use serde::Serialize;

use seld_core::augment::FoaRotation;

#[derive(Debug, Serialize)]
pub struct RotationEntry {
    pub index: usize,
    pub channel_matrix: [[f64; 3]; 3],
    pub label_matrix: [[f64; 3]; 3],
}

pub fn rotation_entries() -> Vec<RotationEntry> {
    FoaRotation::all()
        .iter()
        .map(|r| RotationEntry {
            index: r.index(),
            channel_matrix: *r.channel_matrix(),
            label_matrix: *r.label_matrix(),
        })
        .collect()
}

pub fn render_text() -> String {
    let mut out = String::new();
    for entry in rotation_entries() {
        out.push_str(&format!("rotation {:2}:", entry.index));
        for row in &entry.channel_matrix {
            out.push_str(&format!(
                "  [{:4} {:4} {:4}]",
                row[0] as i64, row[1] as i64, row[2] as i64
            ));
        }
        out.push('\n');
    }
    out
}

pub fn run(json: bool) -> String {
    if json {
        let mut s = serde_json::to_string_pretty(&rotation_entries()).expect("serializes");
        s.push('\n');
        s
    } else {
        render_text()
    }
}
