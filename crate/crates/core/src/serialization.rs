//! Cross-temporal serialization.
//!
//! Both epochs of a sample are quantized on one grid, mapped to a position on
//! a space-filling curve, prefixed with the batch index and sorted together.
//! The sorted sequence is then cut into fixed-capacity patches, each of which
//! usually holds points of both epochs.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::pointset::{MergedInput, Point3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Curve {
    ZOrder,
    ZOrderTrans,
    Hilbert,
    HilbertTrans,
}

impl Curve {
    /// Order in which attention blocks cycle through the curves.
    pub const SCHEDULE: [Curve; 4] = [Curve::ZOrder, Curve::ZOrderTrans, Curve::Hilbert, Curve::HilbertTrans];

    pub fn name(self) -> &'static str {
        match self {
            Curve::ZOrder => "z",
            Curve::ZOrderTrans => "z-trans",
            Curve::Hilbert => "hilbert",
            Curve::HilbertTrans => "hilbert-trans",
        }
    }

    pub fn parse(s: &str) -> Option<Curve> {
        Self::SCHEDULE.into_iter().find(|c| c.name() == s)
    }

    /// Curve index of a grid cell, applying the axis rotation of the `Trans` variants.
    pub fn encode(self, cell: [u32; 3], bits: u32) -> Result<u64> {
        let [x, y, z] = cell;
        match self {
            Curve::ZOrder => morton_code(x, y, z, bits),
            Curve::ZOrderTrans => morton_code(y, z, x, bits),
            Curve::Hilbert => hilbert_code(x, y, z, bits),
            Curve::HilbertTrans => hilbert_code(y, z, x, bits),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SerializationConfig {
    pub curve: Curve,
    pub bits_per_axis: u32,
    pub grid_size: f64,
    pub patch_capacity: usize,
}

impl SerializationConfig {
    pub fn new(curve: Curve, grid_size: f64) -> Self {
        SerializationConfig {
            curve,
            bits_per_axis: 16,
            grid_size,
            patch_capacity: 1024,
        }
    }

    /// Bits taken by the curve position; the batch index sits above them.
    pub fn position_bits(&self) -> u32 {
        3 * self.bits_per_axis
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits_per_axis == 0 || 3 * self.bits_per_axis > 48 {
            return Err(Error::InvalidArgument(format!(
                "bits per axis must be in 1..=16, got {}",
                self.bits_per_axis
            )));
        }
        if self.patch_capacity == 0 {
            return Err(Error::InvalidArgument("patch capacity must be at least 1".into()));
        }
        if !(self.grid_size > 0.0) {
            return Err(Error::InvalidArgument(format!("grid size must be positive, got {}", self.grid_size)));
        }
        Ok(())
    }
}

/// Floor of the shifted coordinate in grid units, clamped to `[0, 2^bits - 1]`.
pub fn grid_quantize(p: Point3, offset: Point3, g: f64, bits: u32) -> Result<[u32; 3]> {
    if !(g > 0.0) {
        return Err(Error::InvalidArgument(format!("grid size must be positive, got {g}")));
    }
    let max = ((1u64 << bits) - 1) as f64;
    let mut cell = [0u32; 3];
    for a in 0..3 {
        let shifted = p[a] - offset[a];
        if shifted < 0.0 || shifted.is_nan() {
            return Err(Error::NegativeCoordinate(shifted));
        }
        cell[a] = (shifted / g).floor().min(max) as u32;
    }
    Ok(cell)
}

fn check_range(v: u32, bits: u32) -> Result<()> {
    if bits > 21 || (v as u64) >> bits != 0 {
        return Err(Error::CoordinateRange { value: v as u64, bits });
    }
    Ok(())
}

/// Spreads the low 21 bits of `v` so that bit `j` lands on bit `3j`.
fn spread3(v: u32) -> u64 {
    let mut x = v as u64 & 0x1f_ffff;
    x = (x | x << 32) & 0x001f_0000_0000_ffff;
    x = (x | x << 16) & 0x001f_0000_ff00_00ff;
    x = (x | x << 8) & 0x100f_00f0_0f00_f00f;
    x = (x | x << 4) & 0x10c3_0c30_c30c_30c3;
    x = (x | x << 2) & 0x1249_2492_4924_9249;
    x
}

fn compact3(code: u64) -> u32 {
    let mut x = code & 0x1249_2492_4924_9249;
    x = (x ^ (x >> 2)) & 0x10c3_0c30_c30c_30c3;
    x = (x ^ (x >> 4)) & 0x100f_00f0_0f00_f00f;
    x = (x ^ (x >> 8)) & 0x001f_0000_ff00_00ff;
    x = (x ^ (x >> 16)) & 0x001f_0000_0000_ffff;
    x = (x ^ (x >> 32)) & 0x1f_ffff;
    x as u32
}

/// Z-order index: bit `j` of x, y, z goes to code bits `3j`, `3j+1`, `3j+2`.
pub fn morton_code(x: u32, y: u32, z: u32, bits: u32) -> Result<u64> {
    for v in [x, y, z] {
        check_range(v, bits)?;
    }
    Ok(spread3(x) | spread3(y) << 1 | spread3(z) << 2)
}

pub fn morton_decode(code: u64, bits: u32) -> Result<[u32; 3]> {
    if bits > 21 || (bits < 21 && code >> (3 * bits) != 0) {
        return Err(Error::CoordinateRange { value: code, bits });
    }
    Ok([compact3(code), compact3(code >> 1), compact3(code >> 2)])
}

// Hilbert indices use the transpose formulation: the index bits are stored
// across the three axis words, most significant level first, axis 0 holding
// the leading bit of each level.

fn axes_to_transpose(x: &mut [u32; 3], bits: u32) {
    let m = 1u32 << (bits - 1);
    let mut q = m;
    while q > 1 {
        let p = q - 1;
        for i in 0..3 {
            if x[i] & q != 0 {
                x[0] ^= p;
            } else {
                let t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
        q >>= 1;
    }
    for i in 1..3 {
        x[i] ^= x[i - 1];
    }
    let mut t = 0;
    let mut q = m;
    while q > 1 {
        if x[2] & q != 0 {
            t ^= q - 1;
        }
        q >>= 1;
    }
    for v in x.iter_mut() {
        *v ^= t;
    }
}

fn transpose_to_axes(x: &mut [u32; 3], bits: u32) {
    let n = 2u64 << (bits - 1);
    let t = x[2] >> 1;
    for i in (1..3).rev() {
        x[i] ^= x[i - 1];
    }
    x[0] ^= t;
    let mut q = 2u64;
    while q != n {
        let p = (q - 1) as u32;
        let qb = q as u32;
        for i in (0..3).rev() {
            if x[i] & qb != 0 {
                x[0] ^= p;
            } else {
                let t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
        q <<= 1;
    }
}

/// Index of the cell along the 3D Hilbert curve of order `bits`.
pub fn hilbert_code(x: u32, y: u32, z: u32, bits: u32) -> Result<u64> {
    for v in [x, y, z] {
        check_range(v, bits)?;
    }
    if bits == 0 {
        return Ok(0);
    }
    let mut t = [x, y, z];
    axes_to_transpose(&mut t, bits);
    let mut code = 0u64;
    for level in (0..bits).rev() {
        for axis in t {
            code = code << 1 | ((axis >> level) & 1) as u64;
        }
    }
    Ok(code)
}

pub fn hilbert_decode(code: u64, bits: u32) -> Result<[u32; 3]> {
    if bits > 21 || (bits < 21 && code >> (3 * bits) != 0) {
        return Err(Error::CoordinateRange { value: code, bits });
    }
    if bits == 0 {
        return Ok([0; 3]);
    }
    let mut t = [0u32; 3];
    for level in 0..bits {
        for (i, axis) in t.iter_mut().enumerate() {
            let bit = (code >> (3 * level + 2 - i as u32)) & 1;
            *axis |= (bit as u32) << level;
        }
    }
    transpose_to_axes(&mut t, bits);
    Ok(t)
}

/// `(b << k) | pos_code`, checking that neither field spills.
pub fn encode_with_batch(pos_code: u64, batch: u64, k: u32) -> Result<u64> {
    if k > 64 {
        return Err(Error::EncodingOverflow(format!("position width {k} exceeds 64 bits")));
    }
    if k < 64 && pos_code >> k != 0 {
        return Err(Error::EncodingOverflow(format!("position {pos_code} needs more than {k} bits")));
    }
    if k > 0 && batch != 0 && (k == 64 || batch >> (64 - k) != 0) {
        return Err(Error::EncodingOverflow(format!("batch {batch} needs more than {} bits", 64 - k)));
    }
    Ok(if k == 64 { pos_code } else { batch << k | pos_code })
}

/// Rows of one serialization, sorted along the curve and cut into patches.
#[derive(Debug, Clone, PartialEq)]
pub struct SerializedOrder {
    /// Row indices in curve order.
    pub permutation: Vec<usize>,
    /// Code of each entry of `permutation`.
    pub codes: Vec<u64>,
    /// Half-open ranges over `permutation`.
    pub patch_bounds: Vec<(usize, usize)>,
}

impl SerializedOrder {
    /// A single patch containing rows `0..n` in order.
    pub fn identity(n: usize) -> Self {
        SerializedOrder {
            permutation: (0..n).collect(),
            codes: vec![0; n],
            patch_bounds: partition_patches(n, n.max(1)),
        }
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    pub fn patch_of_position(&self) -> Vec<usize> {
        let mut out = vec![0; self.len()];
        for (p, &(s, e)) in self.patch_bounds.iter().enumerate() {
            out[s..e].fill(p);
        }
        out
    }

    pub fn patches(&self) -> impl Iterator<Item = &[usize]> {
        self.patch_bounds.iter().map(|&(s, e)| &self.permutation[s..e])
    }
}

/// Consecutive runs of `capacity` rows; the final run holds the remainder.
pub fn partition_patches(n: usize, capacity: usize) -> Vec<(usize, usize)> {
    assert!(capacity >= 1, "patch capacity must be at least 1");
    (0..n).step_by(capacity).map(|s| (s, (s + capacity).min(n))).collect()
}

fn cmp_rows(a: &[f64; 4], b: &[f64; 4]) -> Ordering {
    a[3].total_cmp(&b[3])
        .then(a[0].total_cmp(&b[0]))
        .then(a[1].total_cmp(&b[1]))
        .then(a[2].total_cmp(&b[2]))
}

/// Serializes rows given as `x, y, z, TI` against an explicit grid origin.
pub fn serialize_rows(
    rows: &[[f64; 4]],
    origin: Point3,
    cfg: &SerializationConfig,
    batch_of_row: &[u64],
) -> Result<SerializedOrder> {
    cfg.validate()?;
    let cells = rows
        .iter()
        .map(|r| grid_quantize([r[0], r[1], r[2]], origin, cfg.grid_size, cfg.bits_per_axis))
        .collect::<Result<Vec<_>>>()?;
    order_from_cells(&cells, rows, cfg, batch_of_row)
}

/// Sorts already-quantized rows along `cfg.curve`; `rows` supplies the tie-break.
pub fn order_from_cells(
    cells: &[[u32; 3]],
    rows: &[[f64; 4]],
    cfg: &SerializationConfig,
    batch_of_row: &[u64],
) -> Result<SerializedOrder> {
    cfg.validate()?;
    if batch_of_row.len() != rows.len() || cells.len() != rows.len() {
        return Err(Error::Shape(format!(
            "{} batch indices and {} cells for {} rows",
            batch_of_row.len(),
            cells.len(),
            rows.len()
        )));
    }
    let k = cfg.position_bits();
    let mut keyed = Vec::with_capacity(rows.len());
    for (i, cell) in cells.iter().enumerate() {
        let code = encode_with_batch(cfg.curve.encode(*cell, cfg.bits_per_axis)?, batch_of_row[i], k)?;
        keyed.push((code, i));
    }
    keyed.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(cmp_rows(&rows[a.1], &rows[b.1])).then(a.1.cmp(&b.1)));
    let patch_bounds = partition_patches(keyed.len(), cfg.patch_capacity);
    let (codes, permutation) = keyed.into_iter().unzip();
    Ok(SerializedOrder {
        permutation,
        codes,
        patch_bounds,
    })
}

/// Minimum corner of the merged rows; the grid origin that keeps all cells non-negative.
pub fn min_corner(rows: &[[f64; 4]]) -> Point3 {
    let mut lo = [f64::INFINITY; 3];
    for r in rows {
        for a in 0..3 {
            lo[a] = lo[a].min(r[a]);
        }
    }
    if rows.is_empty() {
        [0.0; 3]
    } else {
        lo
    }
}

/// Cross-temporal ordering of a merged sample, anchored at its minimum corner.
pub fn build_order(merged: &MergedInput, cfg: &SerializationConfig, batch_of_row: &[u64]) -> Result<SerializedOrder> {
    serialize_rows(&merged.rows, min_corner(&merged.rows), cfg, batch_of_row)
}
