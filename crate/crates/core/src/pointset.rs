//! Point-set data model and preprocessing.
//!
//! An epoch is a plain list of coordinates with optional per-point semantic
//! and change labels. Two co-registered epochs form a [`BiTemporalSample`],
//! which is reduced to the network's input rows by [`merge_epochs`].

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

/// Label value for points excluded from supervision and scoring.
pub const IGNORED: u8 = 255;

/// Header line of the text point format.
pub const FILE_HEADER: &str = "#xtcd v1 x y z sem chg";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum SemanticClass {
    Ground = 0,
    Building = 1,
    Vegetation = 2,
    Clutter = 3,
}

impl SemanticClass {
    pub const ALL: [SemanticClass; 4] = [
        SemanticClass::Ground,
        SemanticClass::Building,
        SemanticClass::Vegetation,
        SemanticClass::Clutter,
    ];
    pub const COUNT: usize = 4;

    pub fn from_label(v: u8) -> Option<Self> {
        Self::ALL.get(v as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            SemanticClass::Ground => "Ground",
            SemanticClass::Building => "Building",
            SemanticClass::Vegetation => "Vegetation",
            SemanticClass::Clutter => "Clutter",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum ChangeClass {
    Unchanged = 0,
    NewlyBuilt = 1,
    Demolition = 2,
    NewClutter = 3,
}

impl ChangeClass {
    pub const ALL: [ChangeClass; 4] = [
        ChangeClass::Unchanged,
        ChangeClass::NewlyBuilt,
        ChangeClass::Demolition,
        ChangeClass::NewClutter,
    ];
    pub const COUNT: usize = 4;

    pub fn from_label(v: u8) -> Option<Self> {
        Self::ALL.get(v as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ChangeClass::Unchanged => "Unchanged",
            ChangeClass::NewlyBuilt => "NewlyBuilt",
            ChangeClass::Demolition => "Demolition",
            ChangeClass::NewClutter => "NewClutter",
        }
    }
}

fn check_label(v: u8, count: usize) -> bool {
    v == IGNORED || (v as usize) < count
}

/// One acquisition epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpochPointSet {
    pub coords: Vec<Point3>,
    pub semantic_labels: Option<Vec<u8>>,
    pub change_labels: Option<Vec<u8>>,
}

impl EpochPointSet {
    pub fn new(coords: Vec<Point3>) -> Self {
        EpochPointSet {
            coords,
            semantic_labels: None,
            change_labels: None,
        }
    }

    pub fn with_labels(coords: Vec<Point3>, semantic: Vec<u8>, change: Vec<u8>) -> Result<Self> {
        let ps = EpochPointSet {
            coords,
            semantic_labels: Some(semantic),
            change_labels: Some(change),
        };
        ps.validate()?;
        Ok(ps)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn semantic_label(&self, i: usize) -> u8 {
        self.semantic_labels.as_ref().map_or(IGNORED, |l| l[i])
    }

    pub fn change_label(&self, i: usize) -> u8 {
        self.change_labels.as_ref().map_or(IGNORED, |l| l[i])
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.coords.len();
        for (name, labels, count) in [
            ("semantic", &self.semantic_labels, SemanticClass::COUNT),
            ("change", &self.change_labels, ChangeClass::COUNT),
        ] {
            if let Some(labels) = labels {
                if labels.len() != n {
                    return Err(Error::InvalidPointSet(format!(
                        "{name} labels have length {} but there are {n} points",
                        labels.len()
                    )));
                }
                if let Some(bad) = labels.iter().find(|&&v| !check_label(v, count)) {
                    return Err(Error::InvalidPointSet(format!("{name} label {bad} out of range")));
                }
            }
        }
        if let Some(p) = self.coords.iter().find(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidPointSet(format!("non-finite coordinate {p:?}")));
        }
        Ok(())
    }

    /// Keeps the points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> EpochPointSet {
        let pick = |l: &Option<Vec<u8>>| l.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect());
        EpochPointSet {
            coords: indices.iter().map(|&i| self.coords[i]).collect(),
            semantic_labels: pick(&self.semantic_labels),
            change_labels: pick(&self.change_labels),
        }
    }

    pub fn translated(mut self, delta: Point3) -> EpochPointSet {
        for p in &mut self.coords {
            for a in 0..3 {
                p[a] += delta[a];
            }
        }
        self
    }

    /// Axis-aligned bounding box, `None` when empty.
    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        bounds_of(self.coords.iter())
    }
}

pub(crate) fn bounds_of<'a>(points: impl Iterator<Item = &'a Point3>) -> Option<(Point3, Point3)> {
    let mut out: Option<(Point3, Point3)> = None;
    for p in points {
        let (lo, hi) = out.get_or_insert((*p, *p));
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    out
}

/// Two co-registered epochs in a shared local frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BiTemporalSample {
    pub t0: EpochPointSet,
    pub t1: EpochPointSet,
    /// Offset already subtracted from the source coordinates.
    pub frame_offset: Point3,
}

impl BiTemporalSample {
    pub fn new(t0: EpochPointSet, t1: EpochPointSet) -> Self {
        BiTemporalSample {
            t0,
            t1,
            frame_offset: [0.0; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.t0.validate()?;
        self.t1.validate()?;
        if let Some(chg) = &self.t0.change_labels {
            if chg.iter().any(|&v| v != IGNORED) {
                return Err(Error::InvalidPointSet(
                    "change labels belong to t1; t0 change column must be 255".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.t0.len() + self.t1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn epoch(&self, e: u8) -> &EpochPointSet {
        if e == 0 {
            &self.t0
        } else {
            &self.t1
        }
    }

    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        bounds_of(self.t0.coords.iter().chain(self.t1.coords.iter()))
    }

    /// The sample with epoch roles exchanged.
    pub fn swapped(&self) -> BiTemporalSample {
        BiTemporalSample {
            t0: self.t1.clone(),
            t1: self.t0.clone(),
            frame_offset: self.frame_offset,
        }
    }
}

// ---------------------------------------------------------------------------
// File I/O

pub fn load_pointset(path: impl AsRef<Path>) -> Result<EpochPointSet> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_pointset(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_pointset(reader: impl BufRead) -> Result<EpochPointSet> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|e| Error::io("<input>", e))?,
        None => return Err(Error::Header(String::new())),
    };
    if header.split_whitespace().collect::<Vec<_>>() != FILE_HEADER.split(' ').collect::<Vec<_>>() {
        return Err(Error::Header(header));
    }

    let mut coords = Vec::new();
    let mut sem = Vec::new();
    let mut chg = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line.map_err(|e| Error::io("<input>", e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        let mut p = [0.0; 3];
        for a in 0..3 {
            p[a] = fields[a].parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("bad coordinate {:?}", fields[a]),
            })?;
            if !p[a].is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-finite coordinate {:?}", fields[a]),
                });
            }
        }
        let label = |s: &str, count: usize, what: &str| -> Result<u8> {
            let v: u8 = s.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("bad {what} label {s:?}"),
            })?;
            if !check_label(v, count) {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("{what} label {v} out of range"),
                });
            }
            Ok(v)
        };
        coords.push(p);
        sem.push(label(fields[3], SemanticClass::COUNT, "semantic")?);
        chg.push(label(fields[4], ChangeClass::COUNT, "change")?);
    }

    // A column that is entirely 255 is how an absent label sequence is written.
    let column = |v: Vec<u8>| {
        if v.iter().all(|&x| x == IGNORED) {
            None
        } else {
            Some(v)
        }
    };
    Ok(EpochPointSet {
        coords,
        semantic_labels: column(sem),
        change_labels: column(chg),
    })
}

pub fn format_pointset(ps: &EpochPointSet) -> String {
    let mut out = String::with_capacity(64 * (ps.len() + 1));
    out.push_str(FILE_HEADER);
    out.push('\n');
    for (i, p) in ps.coords.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:.16e} {:.16e} {:.16e} {} {}",
            p[0],
            p[1],
            p[2],
            ps.semantic_label(i),
            ps.change_label(i)
        );
    }
    out
}

pub fn save_pointset(ps: &EpochPointSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    ps.validate()?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(format_pointset(ps).as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Paths of the `_t0` / `_t1` pair for a sample basename.
pub fn sample_paths(base: impl AsRef<Path>) -> (std::path::PathBuf, std::path::PathBuf) {
    let base = base.as_ref();
    let name = base.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    (
        base.with_file_name(format!("{name}_t0.pts")),
        base.with_file_name(format!("{name}_t1.pts")),
    )
}

pub fn load_sample(base: impl AsRef<Path>) -> Result<BiTemporalSample> {
    let (p0, p1) = sample_paths(base);
    let sample = BiTemporalSample::new(load_pointset(p0)?, load_pointset(p1)?);
    sample.validate()?;
    Ok(sample)
}

pub fn save_sample(sample: &BiTemporalSample, base: impl AsRef<Path>) -> Result<()> {
    let (p0, p1) = sample_paths(base);
    save_pointset(&sample.t0, p0)?;
    save_pointset(&sample.t1, p1)
}

// ---------------------------------------------------------------------------
// Preprocessing

fn voxel_key(p: &Point3, g: f64) -> [i64; 3] {
    [
        (p[0] / g).floor() as i64,
        (p[1] / g).floor() as i64,
        (p[2] / g).floor() as i64,
    ]
}

/// Voxel grid reduction.
///
/// Returns the kept (representative) indices in ascending order and, for every
/// input point, the position of its representative within the kept list.
pub fn voxel_downsample_map(ps: &EpochPointSet, g: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::InvalidArgument(format!("voxel size must be positive, got {g}")));
    }
    let mut slot: HashMap<[i64; 3], usize> = HashMap::with_capacity(ps.len());
    let mut kept = Vec::new();
    let mut rep = Vec::with_capacity(ps.len());
    for (i, p) in ps.coords.iter().enumerate() {
        let s = *slot.entry(voxel_key(p, g)).or_insert_with(|| {
            kept.push(i);
            kept.len() - 1
        });
        rep.push(s);
    }
    Ok((kept, rep))
}

/// Keeps the lowest-index point of every occupied voxel of size `g`.
pub fn voxel_downsample(ps: &EpochPointSet, g: f64) -> Result<EpochPointSet> {
    let (kept, _) = voxel_downsample_map(ps, g)?;
    Ok(ps.select(&kept))
}

/// Indices of the points within horizontal distance `r` of `center`.
pub fn cylinder_indices(ps: &EpochPointSet, center: [f64; 2], r: f64) -> Vec<usize> {
    let r2 = r * r;
    ps.coords
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            let dx = p[0] - center[0];
            let dy = p[1] - center[1];
            dx * dx + dy * dy <= r2
        })
        .map(|(i, _)| i)
        .collect()
}

/// Crops both epochs to the same vertical cylinder and re-centers the frame on its axis.
pub fn cylinder_sample(sample: &BiTemporalSample, center: [f64; 2], r: f64) -> Result<BiTemporalSample> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("cylinder radius must be positive, got {r}")));
    }
    let shift = [-center[0], -center[1], 0.0];
    let crop = |ps: &EpochPointSet| ps.select(&cylinder_indices(ps, center, r)).translated(shift);
    Ok(BiTemporalSample {
        t0: crop(&sample.t0),
        t1: crop(&sample.t1),
        frame_offset: [
            sample.frame_offset[0] + center[0],
            sample.frame_offset[1] + center[1],
            sample.frame_offset[2],
        ],
    })
}

/// Network input rows: both epochs stacked, with the temporal indicator column.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedInput {
    /// `x, y, z, TI` per row.
    pub rows: Vec<[f64; 4]>,
    pub epoch_of_row: Vec<u8>,
    /// `(epoch, index within that epoch)` for every row.
    pub row_to_source: Vec<(u8, usize)>,
}

impl MergedInput {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn coords(&self, row: usize) -> Point3 {
        let r = &self.rows[row];
        [r[0], r[1], r[2]]
    }
}

/// Stacks t0 then t1. With `ti_enabled == false` the indicator column is all zeros.
pub fn merge_epochs(sample: &BiTemporalSample, ti_enabled: bool) -> MergedInput {
    let n = sample.len();
    let mut rows = Vec::with_capacity(n);
    let mut epoch_of_row = Vec::with_capacity(n);
    let mut row_to_source = Vec::with_capacity(n);
    for epoch in 0..2u8 {
        let ti = if ti_enabled { epoch as f64 } else { 0.0 };
        for (i, p) in sample.epoch(epoch).coords.iter().enumerate() {
            rows.push([p[0], p[1], p[2], ti]);
            epoch_of_row.push(epoch);
            row_to_source.push((epoch, i));
        }
    }
    MergedInput {
        rows,
        epoch_of_row,
        row_to_source,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn pts(coords: &[Point3]) -> EpochPointSet {
        EpochPointSet::new(coords.to_vec())
    }

    #[test]
    fn parse_single_line() {
        let ps = parse_pointset(format!("{FILE_HEADER}\n1.0 2.0 3.0 0 255\n").as_bytes()).unwrap();
        assert_eq!(ps.coords, vec![[1.0, 2.0, 3.0]]);
        assert_eq!(ps.semantic_label(0), SemanticClass::Ground as u8);
        assert_eq!(ps.change_label(0), IGNORED);
    }

    #[test]
    fn parse_empty_body() {
        let ps = parse_pointset(format!("{FILE_HEADER}\n").as_bytes()).unwrap();
        assert!(ps.is_empty());
    }

    #[test]
    fn parse_reports_line_number() {
        let text = format!("{FILE_HEADER}\n0 0 0 0 0\n1 2 x\n");
        match parse_pointset(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let text = format!("{FILE_HEADER}\n1 2 x 0 0\n");
        assert!(matches!(parse_pointset(text.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn parse_rejects_bad_header_and_labels() {
        assert!(matches!(parse_pointset("#xtcd v2 x y z sem chg\n".as_bytes()), Err(Error::Header(_))));
        let text = format!("{FILE_HEADER}\n0 0 0 4 0\n");
        assert!(matches!(parse_pointset(text.as_bytes()), Err(Error::Parse { line: 2, .. })));
        let text = format!("{FILE_HEADER}\n0 0 0 0 7\n");
        assert!(matches!(parse_pointset(text.as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn round_trip_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1000;
        let coords: Vec<Point3> = (0..n)
            .map(|_| [rng.gen_range(-1e3..1e3), rng.gen::<f64>() * 1e-7, rng.gen_range(-5.0..50.0)])
            .collect();
        let sem: Vec<u8> = (0..n).map(|_| [0, 1, 2, 3, 255][rng.gen_range(0..5)]).collect();
        let chg: Vec<u8> = (0..n).map(|_| [0, 1, 2, 3, 255][rng.gen_range(0..5)]).collect();
        let ps = EpochPointSet::with_labels(coords, sem, chg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pts");
        save_pointset(&ps, &path).unwrap();
        assert_eq!(load_pointset(&path).unwrap(), ps);
    }

    #[test]
    fn unlabeled_writes_sentinels() {
        let ps = pts(&[[1.0, 2.0, 3.0]]);
        let text = format_pointset(&ps);
        assert!(text.lines().nth(1).unwrap().ends_with(" 255 255"));
        assert_eq!(parse_pointset(text.as_bytes()).unwrap(), ps);
    }

    #[test]
    fn empty_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.pts");
        save_pointset(&EpochPointSet::default(), &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), format!("{FILE_HEADER}\n"));
        assert!(load_pointset(&path).unwrap().is_empty());
    }

    #[test]
    fn validate_catches_bad_sets() {
        let ps = EpochPointSet {
            coords: vec![[0.0; 3]; 2],
            semantic_labels: Some(vec![0]),
            change_labels: None,
        };
        assert!(ps.validate().is_err());
        assert!(pts(&[[f64::NAN, 0.0, 0.0]]).validate().is_err());
        assert!(EpochPointSet::with_labels(vec![[0.0; 3]], vec![9], vec![0]).is_err());
    }

    #[test]
    fn voxel_same_and_distinct() {
        let ps = pts(&[[0.1, 0.1, 0.1], [0.2, 0.2, 0.2]]);
        let out = voxel_downsample(&ps, 0.5).unwrap();
        assert_eq!(out.coords, vec![[0.1, 0.1, 0.1]]);
        let ps = pts(&[[0.1, 0.0, 0.0], [0.9, 0.0, 0.0]]);
        assert_eq!(voxel_downsample(&ps, 0.5).unwrap().len(), 2);
        assert!(voxel_downsample(&ps, 0.0).is_err());
        assert!(voxel_downsample(&ps, -1.0).is_err());
    }

    #[test]
    fn voxel_count_matches_hash_set_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ps = pts(&(0..10_000)
            .map(|_| [rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)])
            .collect::<Vec<_>>());
        let occupied: HashSet<(i64, i64, i64)> = ps
            .coords
            .iter()
            .map(|p| ((p[0] / 0.5).floor() as i64, (p[1] / 0.5).floor() as i64, (p[2] / 0.5).floor() as i64))
            .collect();
        let out = voxel_downsample(&ps, 0.5).unwrap();
        assert_eq!(out.len(), occupied.len());
        assert_eq!(voxel_downsample(&out, 0.5).unwrap(), out);
    }

    #[test]
    fn voxel_keeps_labels_of_lowest_index() {
        let ps = EpochPointSet::with_labels(
            vec![[0.3, 0.0, 0.0], [0.1, 0.0, 0.0], [2.0, 0.0, 0.0]],
            vec![1, 2, 0],
            vec![3, 0, 0],
        )
        .unwrap();
        let out = voxel_downsample(&ps, 1.0).unwrap();
        assert_eq!(out.coords, vec![[0.3, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        assert_eq!(out.semantic_labels, Some(vec![1, 0]));
        assert_eq!(out.change_labels, Some(vec![3, 0]));
    }

    #[test]
    fn cylinder_keeps_by_horizontal_distance() {
        let s = BiTemporalSample::new(pts(&[[3.0, 4.0, 100.0], [30.0, 0.0, 0.0]]), pts(&[[0.0, 25.0, -3.0]]));
        let c = cylinder_sample(&s, [0.0, 0.0], 25.0).unwrap();
        assert_eq!(c.t0.coords, vec![[3.0, 4.0, 100.0]]);
        assert_eq!(c.t1.coords, vec![[0.0, 25.0, -3.0]]);
    }

    #[test]
    fn cylinder_recenters_and_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut gen = |n| pts(&(0..n).map(|_| [rng.gen_range(0.0..60.0), rng.gen_range(0.0..60.0), 1.0]).collect::<Vec<_>>());
        let s = BiTemporalSample::new(gen(500), gen(700));
        let once = cylinder_sample(&s, [30.0, 20.0], 12.0).unwrap();
        assert_eq!(once.frame_offset, [30.0, 20.0, 0.0]);
        assert!(once.t0.coords.iter().all(|p| p[0].hypot(p[1]) <= 12.0 + 1e-9));
        let twice = cylinder_sample(&once, [0.0, 0.0], 12.0).unwrap();
        assert_eq!(twice, once);
    }

    #[test]
    fn merge_layout() {
        let s = BiTemporalSample::new(pts(&[[0.0; 3], [1.0; 3]]), pts(&[[2.0; 3], [3.0; 3], [4.0; 3]]));
        let m = merge_epochs(&s, true);
        assert_eq!(m.rows.iter().map(|r| r[3]).collect::<Vec<_>>(), vec![0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(m.epoch_of_row, vec![0, 0, 1, 1, 1]);
        assert_eq!(m.row_to_source[3], (1, 1));
        let m = merge_epochs(&s, false);
        assert!(m.rows.iter().all(|r| r[3] == 0.0));
        assert_eq!(m.epoch_of_row, vec![0, 0, 1, 1, 1]);

        let s = BiTemporalSample::new(EpochPointSet::default(), pts(&[[2.0; 3], [3.0; 3]]));
        let m = merge_epochs(&s, true);
        assert_eq!(m.len(), 2);
        assert!(m.rows.iter().all(|r| r[3] == 1.0));
    }

    #[test]
    fn sample_rejects_t0_change_labels() {
        let t0 = EpochPointSet::with_labels(vec![[0.0; 3]], vec![0], vec![1]).unwrap();
        assert!(BiTemporalSample::new(t0, EpochPointSet::default()).validate().is_err());
    }
}
