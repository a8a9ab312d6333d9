//! Procedural two-epoch urban scenes with semantic and change labels.
//!
//! A scene is a noisy ground plane with box buildings (roofs and walls),
//! ellipsoidal vegetation and small box clutter. Every object independently
//! persists, appears in the later epoch only, or (buildings) disappears from
//! it. Each epoch samples its visible surfaces at its own density; the later
//! epoch is then slightly misaligned.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::keyvalue::{parse_value, split_pair};
use crate::pointset::{BiTemporalSample, ChangeClass, EpochPointSet, Point3, SemanticClass, IGNORED};

/// Facades are seen at a fraction of the nominal density.
const WALL_VISIBILITY: f64 = 0.5;
/// Canopy returns per unit of crown footprint, relative to the nominal density.
const CANOPY_RETURNS: f64 = 1.5;
const PLACEMENT_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    /// Side of the square scene, meters.
    pub extent: f64,
    /// Inclusive range of building counts.
    pub building_count: (usize, usize),
    /// Footprint side length range, meters.
    pub building_size: (f64, f64),
    pub building_height: (f64, f64),
    pub vegetation_count: usize,
    /// Horizontal crown radius range, meters.
    pub vegetation_radius: (f64, f64),
    pub clutter_count: usize,
    /// Points per square meter of visible surface.
    pub density_t0: f64,
    pub density_t1: f64,
    pub p_new_building: f64,
    pub p_demolition: f64,
    pub p_new_clutter: f64,
    /// Standard deviation of per-point noise, meters.
    pub noise_sigma: f64,
    /// Bound on the later epoch's rigid shift per axis, meters.
    pub max_translation: f64,
    /// Bound on the later epoch's rotation about the vertical axis, radians.
    pub max_yaw: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            extent: 100.0,
            building_count: (5, 9),
            building_size: (8.0, 20.0),
            building_height: (4.0, 15.0),
            vegetation_count: 14,
            vegetation_radius: (1.5, 4.0),
            clutter_count: 18,
            density_t0: 5.9,
            density_t1: 8.0,
            p_new_building: 0.1,
            p_demolition: 0.05,
            p_new_clutter: 0.1,
            noise_sigma: 0.03,
            max_translation: 0.1,
            max_yaw: 0.2f64.to_radians(),
            seed: 0,
        }
    }
}

fn check_range(name: &str, r: (f64, f64)) -> Result<()> {
    if !(r.0 > 0.0 && r.0 <= r.1 && r.1.is_finite()) {
        return Err(Error::InvalidArgument(format!("{name} range {r:?} must be positive and ordered")));
    }
    Ok(())
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.extent > 0.0 && self.extent.is_finite()) {
            return Err(Error::InvalidArgument(format!("extent must be positive, got {}", self.extent)));
        }
        if !(self.density_t0 > 0.0 && self.density_t1 > 0.0) {
            return Err(Error::InvalidArgument("densities must be positive".into()));
        }
        for (name, p) in [
            ("p_new_building", self.p_new_building),
            ("p_demolition", self.p_demolition),
            ("p_new_clutter", self.p_new_clutter),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        // A building's fate is drawn once, so the two building outcomes share the unit interval.
        if self.p_new_building + self.p_demolition > 1.0 {
            return Err(Error::InvalidArgument("p_new_building + p_demolition exceeds 1".into()));
        }
        if self.building_count.0 > self.building_count.1 {
            return Err(Error::InvalidArgument("building count range is reversed".into()));
        }
        check_range("building size", self.building_size)?;
        check_range("building height", self.building_height)?;
        check_range("vegetation radius", self.vegetation_radius)?;
        if !(self.noise_sigma >= 0.0 && self.max_translation >= 0.0 && self.max_yaw >= 0.0) {
            return Err(Error::InvalidArgument("noise and misalignment bounds must be non-negative".into()));
        }
        Ok(())
    }

    /// Sidecar text: one `key=value` per field.
    pub fn to_manifest(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        put("extent", self.extent.to_string());
        put("building_count", format!("{},{}", self.building_count.0, self.building_count.1));
        put("building_size", format!("{},{}", self.building_size.0, self.building_size.1));
        put("building_height", format!("{},{}", self.building_height.0, self.building_height.1));
        put("vegetation_count", self.vegetation_count.to_string());
        put("vegetation_radius", format!("{},{}", self.vegetation_radius.0, self.vegetation_radius.1));
        put("clutter_count", self.clutter_count.to_string());
        put("density_t0", self.density_t0.to_string());
        put("density_t1", self.density_t1.to_string());
        put("p_new_building", self.p_new_building.to_string());
        put("p_demolition", self.p_demolition.to_string());
        put("p_new_clutter", self.p_new_clutter.to_string());
        put("noise_sigma", self.noise_sigma.to_string());
        put("max_translation", self.max_translation.to_string());
        put("max_yaw", self.max_yaw.to_string());
        put("seed", self.seed.to_string());
        s
    }

    pub fn from_manifest(text: &str) -> Result<SceneSpec> {
        fn pair<T: std::str::FromStr>(k: &str, v: &str) -> Result<(T, T)> {
            let (a, b) = v.split_once(',').ok_or_else(|| Error::Config(format!("{k} needs two values")))?;
            Ok((parse_value(k, a.trim())?, parse_value(k, b.trim())?))
        }
        let mut spec = SceneSpec::default();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = split_pair(line)?;
            match k {
                "extent" => spec.extent = parse_value(k, v)?,
                "building_count" => spec.building_count = pair(k, v)?,
                "building_size" => spec.building_size = pair(k, v)?,
                "building_height" => spec.building_height = pair(k, v)?,
                "vegetation_count" => spec.vegetation_count = parse_value(k, v)?,
                "vegetation_radius" => spec.vegetation_radius = pair(k, v)?,
                "clutter_count" => spec.clutter_count = parse_value(k, v)?,
                "density_t0" => spec.density_t0 = parse_value(k, v)?,
                "density_t1" => spec.density_t1 = parse_value(k, v)?,
                "p_new_building" => spec.p_new_building = parse_value(k, v)?,
                "p_demolition" => spec.p_demolition = parse_value(k, v)?,
                "p_new_clutter" => spec.p_new_clutter = parse_value(k, v)?,
                "noise_sigma" => spec.noise_sigma = parse_value(k, v)?,
                "max_translation" => spec.max_translation = parse_value(k, v)?,
                "max_yaw" => spec.max_yaw = parse_value(k, v)?,
                "seed" => spec.seed = parse_value(k, v)?,
                _ => return Err(Error::Config(format!("unknown scene key {k:?}"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Independent seed for scene `index` of a dataset; a SplitMix64 step.
pub fn scene_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Presence {
    Both,
    T0Only,
    T1Only,
}

impl Presence {
    fn in_epoch(self, e: u8) -> bool {
        match self {
            Presence::Both => true,
            Presence::T0Only => e == 0,
            Presence::T1Only => e == 1,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Rect {
    fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.lo[0] && x <= self.hi[0] && y >= self.lo[1] && y <= self.hi[1]
    }

    fn overlaps(&self, o: &Rect, gap: f64) -> bool {
        self.lo[0] - gap < o.hi[0] && o.lo[0] - gap < self.hi[0] && self.lo[1] - gap < o.hi[1] && o.lo[1] - gap < self.hi[1]
    }

    fn area(&self) -> f64 {
        (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])
    }
}

#[derive(Debug, Clone, Copy)]
struct Solid {
    foot: Rect,
    base: f64,
    top: f64,
    presence: Presence,
    semantic: SemanticClass,
}

#[derive(Debug, Clone, Copy)]
struct Crown {
    center: Point3,
    radii: Point3,
    presence: Presence,
}

struct Layout {
    solids: Vec<Solid>,
    crowns: Vec<Crown>,
}

fn presence(rng: &mut ChaCha8Rng, p_new: f64, p_gone: f64) -> Presence {
    let u: f64 = rng.gen();
    if u < p_new {
        Presence::T1Only
    } else if u < p_new + p_gone {
        Presence::T0Only
    } else {
        Presence::Both
    }
}

fn random_rect(rng: &mut ChaCha8Rng, extent: f64, size: (f64, f64), margin: f64) -> Option<Rect> {
    let sx = rng.gen_range(size.0..=size.1);
    let sy = rng.gen_range(size.0..=size.1);
    if sx + 2.0 * margin >= extent || sy + 2.0 * margin >= extent {
        return None;
    }
    let x = rng.gen_range(margin..extent - margin - sx);
    let y = rng.gen_range(margin..extent - margin - sy);
    Some(Rect {
        lo: [x, y],
        hi: [x + sx, y + sy],
    })
}

fn layout(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Layout {
    let e = spec.extent;
    let mut solids: Vec<Solid> = Vec::new();
    let mut blocked: Vec<Rect> = Vec::new();

    let n_buildings = rng.gen_range(spec.building_count.0..=spec.building_count.1);
    for _ in 0..n_buildings {
        for _ in 0..PLACEMENT_ATTEMPTS {
            let Some(foot) = random_rect(rng, e, spec.building_size, 2.0) else { break };
            if blocked.iter().any(|b| b.overlaps(&foot, 4.0)) {
                continue;
            }
            let height = rng.gen_range(spec.building_height.0..=spec.building_height.1);
            let fate = presence(rng, spec.p_new_building, spec.p_demolition);
            solids.push(Solid {
                foot,
                base: 0.0,
                top: height,
                presence: fate,
                semantic: SemanticClass::Building,
            });
            // Roof attachments: a small new box on a persisting roof.
            if fate == Presence::Both && rng.gen::<f64>() < spec.p_new_building {
                let side = (foot.hi[0] - foot.lo[0]).min(foot.hi[1] - foot.lo[1]);
                let s = (side * 0.4).min(4.0);
                let x = rng.gen_range(foot.lo[0]..foot.hi[0] - s);
                let y = rng.gen_range(foot.lo[1]..foot.hi[1] - s);
                solids.push(Solid {
                    foot: Rect {
                        lo: [x, y],
                        hi: [x + s, y + s],
                    },
                    base: height,
                    top: height + rng.gen_range(1.5..3.0),
                    presence: Presence::T1Only,
                    semantic: SemanticClass::Building,
                });
            }
            blocked.push(foot);
            break;
        }
    }

    let mut crowns = Vec::new();
    for _ in 0..spec.vegetation_count {
        for _ in 0..PLACEMENT_ATTEMPTS {
            let r = rng.gen_range(spec.vegetation_radius.0..=spec.vegetation_radius.1);
            let Some(foot) = random_rect(rng, e, (2.0 * r, 2.0 * r), 0.5) else { break };
            if blocked.iter().any(|b| b.overlaps(&foot, 1.0)) {
                continue;
            }
            let rz = r * rng.gen_range(1.0..1.5);
            crowns.push(Crown {
                center: [(foot.lo[0] + foot.hi[0]) / 2.0, (foot.lo[1] + foot.hi[1]) / 2.0, 1.5 + rz],
                radii: [r, r, rz],
                presence: presence(rng, spec.p_new_clutter, 0.0),
            });
            blocked.push(foot);
            break;
        }
    }

    for _ in 0..spec.clutter_count {
        for _ in 0..PLACEMENT_ATTEMPTS {
            let Some(foot) = random_rect(rng, e, (1.5, 4.5), 0.5) else { break };
            if blocked.iter().any(|b| b.overlaps(&foot, 1.0)) {
                continue;
            }
            solids.push(Solid {
                foot,
                base: 0.0,
                top: rng.gen_range(1.0..2.5),
                presence: presence(rng, spec.p_new_clutter, 0.0),
                semantic: SemanticClass::Clutter,
            });
            blocked.push(foot);
            break;
        }
    }
    Layout { solids, crowns }
}

fn change_of(presence: Presence, semantic: SemanticClass) -> ChangeClass {
    match (presence, semantic) {
        (Presence::T1Only, SemanticClass::Building) => ChangeClass::NewlyBuilt,
        (Presence::T1Only, _) => ChangeClass::NewClutter,
        _ => ChangeClass::Unchanged,
    }
}

struct EpochBuilder {
    coords: Vec<Point3>,
    semantic: Vec<u8>,
    change: Vec<u8>,
}

impl EpochBuilder {
    fn push(&mut self, p: Point3, s: SemanticClass, c: ChangeClass) {
        self.coords.push(p);
        self.semantic.push(s as u8);
        self.change.push(c as u8);
    }
}

fn count(rng: &mut ChaCha8Rng, expected: f64) -> usize {
    // Round stochastically so small faces still receive points on average.
    let base = expected.floor();
    base as usize + usize::from(rng.gen::<f64>() < expected - base)
}

fn sample_epoch(spec: &SceneSpec, lay: &Layout, epoch: u8, rng: &mut ChaCha8Rng) -> EpochBuilder {
    let density = if epoch == 0 { spec.density_t0 } else { spec.density_t1 };
    let e = spec.extent;
    let mut out = EpochBuilder {
        coords: Vec::new(),
        semantic: Vec::new(),
        change: Vec::new(),
    };
    let present: Vec<&Solid> = lay.solids.iter().filter(|s| s.presence.in_epoch(epoch)).collect();

    // Ground, hidden under every solid standing on it in this epoch.
    for _ in 0..count(rng, density * e * e) {
        let (x, y) = (rng.gen_range(0.0..e), rng.gen_range(0.0..e));
        if present.iter().any(|s| s.base == 0.0 && s.foot.contains(x, y)) {
            continue;
        }
        let demolished = epoch == 1
            && lay
                .solids
                .iter()
                .any(|s| s.presence == Presence::T0Only && s.semantic == SemanticClass::Building && s.foot.contains(x, y));
        let change = if demolished { ChangeClass::Demolition } else { ChangeClass::Unchanged };
        out.push([x, y, 0.0], SemanticClass::Ground, change);
    }

    for s in &present {
        let change = change_of(s.presence, s.semantic);
        let (lo, hi) = (s.foot.lo, s.foot.hi);
        // Roof, minus whatever sits on top of it in this epoch.
        for _ in 0..count(rng, density * s.foot.area()) {
            let (x, y) = (rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1]));
            if present.iter().any(|o| o.base == s.top && o.foot.contains(x, y)) {
                continue;
            }
            out.push([x, y, s.top], s.semantic, change);
        }
        let h = s.top - s.base;
        for face in 0..4 {
            let len = if face < 2 { hi[0] - lo[0] } else { hi[1] - lo[1] };
            for _ in 0..count(rng, density * WALL_VISIBILITY * len * h) {
                let t = rng.gen_range(0.0..len);
                let z = s.base + rng.gen_range(0.0..h);
                let p = match face {
                    0 => [lo[0] + t, lo[1], z],
                    1 => [lo[0] + t, hi[1], z],
                    2 => [lo[0], lo[1] + t, z],
                    _ => [hi[0], lo[1] + t, z],
                };
                out.push(p, s.semantic, change);
            }
        }
    }

    for c in lay.crowns.iter().filter(|c| c.presence.in_epoch(epoch)) {
        let change = change_of(c.presence, SemanticClass::Vegetation);
        let n = count(rng, density * CANOPY_RETURNS * std::f64::consts::PI * c.radii[0] * c.radii[1]);
        let mut placed = 0;
        while placed < n {
            let u = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            if u[0] * u[0] + u[1] * u[1] + u[2] * u[2] > 1.0 {
                continue;
            }
            let p = [
                c.center[0] + u[0] * c.radii[0],
                c.center[1] + u[1] * c.radii[1],
                c.center[2] + u[2] * c.radii[2],
            ];
            out.push(p, SemanticClass::Vegetation, change);
            placed += 1;
        }
    }
    out
}

fn finish(mut b: EpochBuilder, spec: &SceneSpec, rng: &mut ChaCha8Rng, misalign: Option<(f64, [f64; 3])>) -> Result<EpochPointSet> {
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mid = spec.extent / 2.0;
    for p in &mut b.coords {
        for v in p.iter_mut() {
            *v += noise.sample(rng);
        }
        if let Some((yaw, t)) = misalign {
            let (s, c) = yaw.sin_cos();
            let (dx, dy) = (p[0] - mid, p[1] - mid);
            *p = [mid + c * dx - s * dy + t[0], mid + s * dx + c * dy + t[1], p[2] + t[2]];
        }
    }
    let keep: Vec<usize> = (0..b.coords.len())
        .filter(|&i| {
            let p = b.coords[i];
            (0.0..=spec.extent).contains(&p[0]) && (0.0..=spec.extent).contains(&p[1])
        })
        .collect();
    let coords = keep.iter().map(|&i| b.coords[i]).collect();
    let semantic = keep.iter().map(|&i| b.semantic[i]).collect();
    let change = keep.iter().map(|&i| b.change[i]).collect();
    EpochPointSet::with_labels(coords, semantic, change)
}

/// Generates a fully labeled scene pair; identical specs give identical scenes.
pub fn generate_scene_pair(spec: &SceneSpec) -> Result<BiTemporalSample> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lay = layout(spec, &mut rng);
    let b0 = sample_epoch(spec, &lay, 0, &mut rng);
    let b1 = sample_epoch(spec, &lay, 1, &mut rng);
    let yaw = rng.gen_range(-1.0..=1.0) * spec.max_yaw;
    let t = [0; 3].map(|_| rng.gen_range(-1.0..=1.0) * spec.max_translation);
    let mut t0 = finish(b0, spec, &mut rng, None)?;
    let t1 = finish(b1, spec, &mut rng, Some((yaw, t)))?;
    if t0.is_empty() && t1.is_empty() {
        return Err(Error::InvalidArgument("scene specification produced no points".into()));
    }
    // The earlier epoch carries no change labels.
    t0.change_labels = None;
    debug_assert!(t1.change_labels.as_ref().map_or(true, |c| c.iter().all(|&v| v != IGNORED)));
    Ok(BiTemporalSample::new(t0, t1))
}

/// Strip widths of the train, validation and test parts.
pub const SPLIT_RATIO: [f64; 3] = [6.0, 1.0, 2.0];

/// Cuts `[lo, hi]` along `axis` into 6:1:2 strips. Intervals are closed on the
/// right, so a point exactly on a boundary goes to the strip on its left.
pub fn split_scene_range(sample: &BiTemporalSample, axis: usize, lo: f64, hi: f64) -> Result<[BiTemporalSample; 3]> {
    if axis > 2 {
        return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
    }
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!("degenerate extent [{lo}, {hi}]")));
    }
    let total: f64 = SPLIT_RATIO.iter().sum();
    let b1 = lo + (hi - lo) * SPLIT_RATIO[0] / total;
    let b2 = lo + (hi - lo) * (SPLIT_RATIO[0] + SPLIT_RATIO[1]) / total;
    let strip = |v: f64| if v <= b1 { 0 } else if v <= b2 { 1 } else { 2 };
    let part = |ps: &EpochPointSet, k: usize| {
        let idx: Vec<usize> = (0..ps.len()).filter(|&i| strip(ps.coords[i][axis]) == k).collect();
        ps.select(&idx)
    };
    Ok([0, 1, 2].map(|k| BiTemporalSample {
        t0: part(&sample.t0, k),
        t1: part(&sample.t1, k),
        frame_offset: sample.frame_offset,
    }))
}

/// [`split_scene_range`] over the sample's own extent along `axis`.
pub fn split_scene(sample: &BiTemporalSample, axis: usize) -> Result<[BiTemporalSample; 3]> {
    let (lo, hi) = sample.bounds().ok_or(Error::EmptySample)?;
    if axis > 2 {
        return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
    }
    split_scene_range(sample, axis, lo[axis], hi[axis])
}

pub fn save_manifest(spec: &SceneSpec, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, spec.to_manifest()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SceneSpec {
        SceneSpec {
            extent: 40.0,
            building_count: (2, 3),
            vegetation_count: 4,
            clutter_count: 5,
            seed,
            ..SceneSpec::default()
        }
    }

    #[test]
    fn same_seed_same_scene() {
        let a = generate_scene_pair(&small(3)).unwrap();
        let b = generate_scene_pair(&small(3)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_scene_pair(&small(4)).unwrap());
    }

    #[test]
    fn no_change_means_all_unchanged() {
        let spec = SceneSpec {
            p_new_building: 0.0,
            p_demolition: 0.0,
            p_new_clutter: 0.0,
            ..small(5)
        };
        let s = generate_scene_pair(&spec).unwrap();
        assert!(s.t1.change_labels.unwrap().iter().all(|&c| c == ChangeClass::Unchanged as u8));
    }

    #[test]
    fn full_demolition_clears_every_building() {
        let spec = SceneSpec {
            p_new_building: 0.0,
            p_demolition: 1.0,
            ..small(6)
        };
        let s = generate_scene_pair(&spec).unwrap();
        let sem1 = s.t1.semantic_labels.as_ref().unwrap();
        let chg1 = s.t1.change_labels.as_ref().unwrap();
        assert!(sem1.iter().all(|&c| c != SemanticClass::Building as u8));
        assert!(s.t0.semantic_labels.as_ref().unwrap().iter().any(|&c| c == SemanticClass::Building as u8));
        let demolished = chg1.iter().filter(|&&c| c == ChangeClass::Demolition as u8).count();
        assert!(demolished > 0);
        for (i, &c) in chg1.iter().enumerate() {
            if c == ChangeClass::Demolition as u8 {
                assert_eq!(sem1[i], SemanticClass::Ground as u8);
            }
        }
    }

    #[test]
    fn labels_are_consistent_and_in_bounds() {
        for seed in 0..4 {
            let s = generate_scene_pair(&SceneSpec {
                p_new_building: 0.4,
                p_demolition: 0.3,
                p_new_clutter: 0.4,
                ..small(seed)
            })
            .unwrap();
            s.validate().unwrap();
            let sem = s.t1.semantic_labels.as_ref().unwrap();
            for (i, &c) in s.t1.change_labels.as_ref().unwrap().iter().enumerate() {
                match ChangeClass::from_label(c).unwrap() {
                    ChangeClass::NewlyBuilt => assert_eq!(sem[i], SemanticClass::Building as u8),
                    ChangeClass::Demolition => assert_eq!(sem[i], SemanticClass::Ground as u8),
                    ChangeClass::NewClutter => {
                        assert!(sem[i] == SemanticClass::Vegetation as u8 || sem[i] == SemanticClass::Clutter as u8)
                    }
                    ChangeClass::Unchanged => {}
                }
            }
            for ps in [&s.t0, &s.t1] {
                for p in &ps.coords {
                    assert!((0.0..=40.0).contains(&p[0]) && (0.0..=40.0).contains(&p[1]));
                }
            }
        }
    }

    #[test]
    fn split_boundaries() {
        let coords = vec![[0.0, 0.0, 0.0], [60.0, 1.0, 0.0], [60.000001, 1.0, 0.0], [70.0, 0.0, 0.0], [90.0, 0.0, 0.0]];
        let ps = EpochPointSet::new(coords);
        let s = BiTemporalSample::new(ps.clone(), ps);
        let [a, b, c] = split_scene_range(&s, 0, 0.0, 90.0).unwrap();
        assert_eq!(a.t0.len(), 2);
        assert_eq!(b.t0.len(), 2);
        assert_eq!(c.t1.len(), 1);
        assert!(split_scene_range(&s, 0, 5.0, 5.0).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let spec = SceneSpec { seed: 77, ..SceneSpec::default() };
        assert_eq!(SceneSpec::from_manifest(&spec.to_manifest()).unwrap(), spec);
    }

    #[test]
    fn scene_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| scene_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }
}
