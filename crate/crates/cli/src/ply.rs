//! ASCII PLY with one class color per point.

use std::fmt::Write as _;

use clap::ValueEnum;
use xtcd::pointset::EpochPointSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LabelKind {
    Change,
    Semantic,
}

/// Unchanged, NewlyBuilt, Demolition, NewClutter.
pub const CHANGE_COLORS: [[u8; 3]; 4] = [[128, 128, 128], [228, 26, 28], [55, 126, 184], [77, 175, 74]];
/// Ground, Building, Vegetation, Clutter.
pub const SEMANTIC_COLORS: [[u8; 3]; 4] = [[160, 120, 80], [200, 60, 60], [60, 160, 60], [200, 160, 40]];
/// Points whose label is ignored.
pub const IGNORED_COLOR: [u8; 3] = [0, 0, 0];

pub fn color(kind: LabelKind, label: u8) -> [u8; 3] {
    let table = match kind {
        LabelKind::Change => &CHANGE_COLORS,
        LabelKind::Semantic => &SEMANTIC_COLORS,
    };
    table.get(label as usize).copied().unwrap_or(IGNORED_COLOR)
}

pub fn to_ply(ps: &EpochPointSet, kind: LabelKind) -> String {
    let mut s = String::with_capacity(48 * (ps.len() + 10));
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", ps.len());
    for p in ["x", "y", "z"] {
        let _ = writeln!(s, "property float {p}");
    }
    for p in ["red", "green", "blue"] {
        let _ = writeln!(s, "property uchar {p}");
    }
    s.push_str("end_header\n");
    for (i, p) in ps.coords.iter().enumerate() {
        let label = match kind {
            LabelKind::Change => ps.change_label(i),
            LabelKind::Semantic => ps.semantic_label(i),
        };
        let [r, g, b] = color(kind, label);
        // PLY float is 32-bit.
        let _ = writeln!(s, "{} {} {} {r} {g} {b}", p[0] as f32, p[1] as f32, p[2] as f32);
    }
    s
}
