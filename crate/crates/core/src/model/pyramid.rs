//! Point hierarchy shared by every block of one forward pass.
//!
//! Level 0 holds the merged rows in canonical order (sorted by coordinates,
//! then indicator, then input position), which makes the network independent
//! of input ordering. Each coarser level groups the rows of the one below by
//! `(grid cell, epoch)`; groups are numbered by their first member so the
//! numbering does not depend on which epoch carries which tag.

use std::collections::HashMap;

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::kernels::NeighborhoodIndex;
use crate::pointset::{MergedInput, Point3};
use crate::serialization::{grid_quantize, min_corner, order_from_cells, Curve, SerializationConfig, SerializedOrder};

pub(crate) const LEVELS: usize = 5;
const BITS: u32 = 16;

pub(crate) struct Level {
    /// `x, y, z, TI` per row; pooled rows carry their members' mean position.
    pub rows: Vec<[f64; 4]>,
    pub epochs: Vec<u8>,
    pub cells: Vec<[u32; 3]>,
    pub index: NeighborhoodIndex,
    pub orders: Vec<SerializedOrder>,
    /// Group at this level of each row of the level below; empty at level 0.
    pub group_of_child: Vec<usize>,
}

impl Level {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn coords(&self) -> Vec<Point3> {
        self.rows.iter().map(|r| [r[0], r[1], r[2]]).collect()
    }

    pub fn order(&self, curve: Curve) -> &SerializedOrder {
        let i = Curve::SCHEDULE.iter().position(|&c| c == curve).expect("scheduled curve");
        &self.orders[i]
    }
}

pub(crate) struct Pyramid {
    /// Merged row index of each canonical row.
    pub canonical: Vec<usize>,
    pub levels: Vec<Level>,
}

/// Merged row indices sorted by `(x, y, z, TI, input index)`.
pub(crate) fn canonical_order(merged: &MergedInput) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..merged.len()).collect();
    idx.sort_by(|&a, &b| {
        let (ra, rb) = (&merged.rows[a], &merged.rows[b]);
        ra[0]
            .total_cmp(&rb[0])
            .then(ra[1].total_cmp(&rb[1]))
            .then(ra[2].total_cmp(&rb[2]))
            .then(ra[3].total_cmp(&rb[3]))
            .then(a.cmp(&b))
    });
    idx
}

fn serializations(cells: &[[u32; 3]], rows: &[[f64; 4]], grid: f64, capacity: usize) -> Result<Vec<SerializedOrder>> {
    let batch = vec![0u64; rows.len()];
    Curve::SCHEDULE
        .iter()
        .map(|&curve| {
            let cfg = SerializationConfig {
                curve,
                bits_per_axis: BITS,
                grid_size: grid,
                patch_capacity: capacity,
            };
            order_from_cells(cells, rows, &cfg, &batch)
        })
        .collect()
}

impl Pyramid {
    pub fn build(merged: &MergedInput, cfg: &ModelConfig) -> Result<Pyramid> {
        if merged.is_empty() {
            return Err(Error::EmptySample);
        }
        let canonical = canonical_order(merged);
        let rows: Vec<[f64; 4]> = canonical.iter().map(|&i| merged.rows[i]).collect();
        let epochs: Vec<u8> = canonical.iter().map(|&i| merged.epoch_of_row[i]).collect();
        let origin = min_corner(&rows);

        let quantize = |rows: &[[f64; 4]], g: f64| -> Result<Vec<[u32; 3]>> {
            rows.iter().map(|r| grid_quantize([r[0], r[1], r[2]], origin, g, BITS)).collect()
        };

        let cells = quantize(&rows, cfg.grid_at(0))?;
        let mut levels = vec![Level {
            index: NeighborhoodIndex::new(&cells),
            orders: serializations(&cells, &rows, cfg.grid_at(0), cfg.patch_capacity)?,
            rows,
            epochs,
            cells,
            group_of_child: Vec::new(),
        }];

        for level in 1..LEVELS {
            let child = &levels[level - 1];
            // Cells nest exactly from level 2 on; level 1 is quantized afresh
            // because the base grid need not be a power-of-two multiple of the voxel.
            let parent_cells = if level == 1 {
                quantize(&child.rows, cfg.grid_at(1))?
            } else {
                child.cells.iter().map(|c| c.map(|v| v >> 1)).collect()
            };
            let mut group_id: HashMap<([u32; 3], u8), usize> = HashMap::new();
            let mut group_of_child = Vec::with_capacity(child.len());
            let mut sums: Vec<[f64; 3]> = Vec::new();
            let mut counts: Vec<usize> = Vec::new();
            let mut rows = Vec::new();
            let mut epochs = Vec::new();
            let mut cells = Vec::new();
            for (i, r) in child.rows.iter().enumerate() {
                let key = (parent_cells[i], child.epochs[i]);
                let g = *group_id.entry(key).or_insert_with(|| {
                    rows.push([0.0, 0.0, 0.0, r[3]]);
                    epochs.push(child.epochs[i]);
                    cells.push(parent_cells[i]);
                    sums.push([0.0; 3]);
                    counts.push(0);
                    rows.len() - 1
                });
                for a in 0..3 {
                    sums[g][a] += r[a];
                }
                counts[g] += 1;
                group_of_child.push(g);
            }
            for (g, row) in rows.iter_mut().enumerate() {
                for a in 0..3 {
                    row[a] = sums[g][a] / counts[g] as f64;
                }
            }
            levels.push(Level {
                index: NeighborhoodIndex::new(&cells),
                orders: serializations(&cells, &rows, cfg.grid_at(level), cfg.patch_capacity)?,
                rows,
                epochs,
                cells,
                group_of_child,
            });
        }
        Ok(Pyramid { canonical, levels })
    }
}
