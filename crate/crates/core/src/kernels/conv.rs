//! Sparse 3×3×3 neighborhood convolution over occupied grid cells, with an
//! additive skip. Used as the conditional position encoding in front of each
//! attention layer.

use std::collections::HashMap;

use super::matrix::FeatureMatrix;
use crate::error::{Error, Result};

pub const KERNEL_VOLUME: usize = 27;
pub const CENTER_OFFSET: usize = 13;

/// Offset index for a displacement in `{-1, 0, 1}^3`.
pub fn offset_index(d: [i32; 3]) -> usize {
    ((d[0] + 1) * 9 + (d[1] + 1) * 3 + (d[2] + 1)) as usize
}

/// Occupied cells of one level and their 27-neighborhoods.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodIndex {
    cell_of_row: Vec<usize>,
    /// Rows per cell in ascending order (CSR layout).
    member_start: Vec<usize>,
    members: Vec<usize>,
    /// Neighbor cell per offset, `usize::MAX` when empty.
    neighbors: Vec<[usize; KERNEL_VOLUME]>,
}

impl NeighborhoodIndex {
    /// Cells are numbered in order of their first row.
    pub fn new(grid_cells: &[[u32; 3]]) -> Self {
        let mut id_of: HashMap<[u32; 3], usize> = HashMap::with_capacity(grid_cells.len());
        let mut cells = Vec::new();
        let cell_of_row: Vec<usize> = grid_cells
            .iter()
            .map(|c| {
                *id_of.entry(*c).or_insert_with(|| {
                    cells.push(*c);
                    cells.len() - 1
                })
            })
            .collect();

        let mut member_start = vec![0usize; cells.len() + 1];
        for &c in &cell_of_row {
            member_start[c + 1] += 1;
        }
        for i in 0..cells.len() {
            member_start[i + 1] += member_start[i];
        }
        let mut fill = member_start.clone();
        let mut members = vec![0; cell_of_row.len()];
        for (r, &c) in cell_of_row.iter().enumerate() {
            members[fill[c]] = r;
            fill[c] += 1;
        }

        let neighbors = cells
            .iter()
            .map(|c| {
                let mut nb = [usize::MAX; KERNEL_VOLUME];
                for dx in -1i32..=1 {
                    for dy in -1i32..=1 {
                        for dz in -1i32..=1 {
                            let p = [c[0] as i64 + dx as i64, c[1] as i64 + dy as i64, c[2] as i64 + dz as i64];
                            if p.iter().any(|&v| v < 0 || v > u32::MAX as i64) {
                                continue;
                            }
                            if let Some(&id) = id_of.get(&[p[0] as u32, p[1] as u32, p[2] as u32]) {
                                nb[offset_index([dx, dy, dz])] = id;
                            }
                        }
                    }
                }
                nb
            })
            .collect();

        NeighborhoodIndex {
            cell_of_row,
            member_start,
            members,
            neighbors,
        }
    }

    pub fn cells(&self) -> usize {
        self.neighbors.len()
    }

    pub fn rows(&self) -> usize {
        self.cell_of_row.len()
    }

    pub fn members(&self, cell: usize) -> &[usize] {
        &self.members[self.member_start[cell]..self.member_start[cell + 1]]
    }

    fn cell_means(&self, x: &FeatureMatrix) -> FeatureMatrix {
        let mut means = FeatureMatrix::zeros(self.cells(), x.cols());
        for cell in 0..self.cells() {
            let m = self.members(cell);
            let row = means.row_mut(cell);
            for &r in m {
                for (a, b) in row.iter_mut().zip(x.row(r)) {
                    *a += b;
                }
            }
            let inv = 1.0 / m.len() as f64;
            row.iter_mut().for_each(|v| *v *= inv);
        }
        means
    }
}

/// `y_i = x_i + Σ_o mean(cell(i) + o) · W_o`, where `weights` stacks the 27
/// `C × C` matrices vertically (`27C × C`).
pub fn sparse_neighborhood_conv(
    x: &FeatureMatrix,
    index: &NeighborhoodIndex,
    weights: &FeatureMatrix,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let c = x.cols();
    if index.rows() != x.rows() {
        return Err(Error::Shape(format!("{} grid cells for {} rows", index.rows(), x.rows())));
    }
    if weights.shape() != (KERNEL_VOLUME * c, c) {
        return Err(Error::Shape(format!("conv weights {:?} for {c} channels", weights.shape())));
    }
    let means = index.cell_means(x);
    let mut cell_out = FeatureMatrix::zeros(index.cells(), c);
    for cell in 0..index.cells() {
        let out = cell_out.row_mut(cell);
        for (o, &nb) in index.neighbors[cell].iter().enumerate() {
            if nb == usize::MAX {
                continue;
            }
            let w = &weights.data()[o * c * c..(o + 1) * c * c];
            for (k, &m) in means.row(nb).iter().enumerate() {
                for (a, b) in out.iter_mut().zip(&w[k * c..(k + 1) * c]) {
                    *a += m * b;
                }
            }
        }
    }
    let mut y = x.clone();
    for (r, &cell) in index.cell_of_row.iter().enumerate() {
        for (a, b) in y.row_mut(r).iter_mut().zip(cell_out.row(cell)) {
            *a += b;
        }
    }
    Ok((y, means))
}

/// Returns `(dx, dweights)`; `means` is the second output of the forward pass.
pub fn sparse_neighborhood_conv_backward(
    index: &NeighborhoodIndex,
    weights: &FeatureMatrix,
    means: &FeatureMatrix,
    dy: &FeatureMatrix,
) -> (FeatureMatrix, FeatureMatrix) {
    let c = dy.cols();
    let mut gcell = FeatureMatrix::zeros(index.cells(), c);
    for (r, &cell) in index.cell_of_row.iter().enumerate() {
        for (a, b) in gcell.row_mut(cell).iter_mut().zip(dy.row(r)) {
            *a += b;
        }
    }
    let mut dw = FeatureMatrix::zeros(weights.rows(), c);
    let mut dmean = FeatureMatrix::zeros(index.cells(), c);
    for cell in 0..index.cells() {
        let g = gcell.row(cell);
        for (o, &nb) in index.neighbors[cell].iter().enumerate() {
            if nb == usize::MAX {
                continue;
            }
            let w = &weights.data()[o * c * c..(o + 1) * c * c];
            let m = means.row(nb);
            let dwo = &mut dw.data_mut()[o * c * c..(o + 1) * c * c];
            for k in 0..c {
                let mk = m[k];
                let wk = &w[k * c..(k + 1) * c];
                let mut acc = 0.0;
                for j in 0..c {
                    dwo[k * c + j] += mk * g[j];
                    acc += wk[j] * g[j];
                }
                dmean[(nb, k)] += acc;
            }
        }
    }
    let mut dx = dy.clone();
    for cell in 0..index.cells() {
        let m = index.members(cell);
        let inv = 1.0 / m.len() as f64;
        for &r in m {
            for (a, b) in dx.row_mut(r).iter_mut().zip(dmean.row(cell)) {
                *a += b * inv;
            }
        }
    }
    (dx, dw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> FeatureMatrix {
        FeatureMatrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn zero_weights_are_skip_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = random(&mut rng, 5, 3);
        let cells = [[0, 0, 0], [1, 0, 0], [1, 0, 0], [5, 5, 5], [0, 1, 1]];
        let (y, _) = sparse_neighborhood_conv(&x, &NeighborhoodIndex::new(&cells), &FeatureMatrix::zeros(81, 3)).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn isolated_cell_with_center_identity_doubles() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&mut rng, 1, 4);
        let mut w = FeatureMatrix::zeros(27 * 4, 4);
        for k in 0..4 {
            w[(CENTER_OFFSET * 4 + k, k)] = 1.0;
        }
        let (y, _) = sparse_neighborhood_conv(&x, &NeighborhoodIndex::new(&[[3, 3, 3]]), &w).unwrap();
        for k in 0..4 {
            assert!((y[(0, k)] - 2.0 * x[(0, k)]).abs() < 1e-15);
        }
    }

    /// Dense-grid evaluation of the same stencil.
    fn dense_oracle(x: &FeatureMatrix, cells: &[[u32; 3]], w: &FeatureMatrix) -> FeatureMatrix {
        let c = x.cols();
        let size = 8usize;
        let mut sum = vec![vec![0.0; c]; size * size * size];
        let mut cnt = vec![0usize; size * size * size];
        let at = |p: [u32; 3]| (p[0] as usize * size + p[1] as usize) * size + p[2] as usize;
        for (r, p) in cells.iter().enumerate() {
            cnt[at(*p)] += 1;
            for k in 0..c {
                sum[at(*p)][k] += x[(r, k)];
            }
        }
        let mut y = x.clone();
        for (r, p) in cells.iter().enumerate() {
            for dx in -1i32..=1 {
                for dy in -1i32..=1 {
                    for dz in -1i32..=1 {
                        let q = [p[0] as i32 + dx, p[1] as i32 + dy, p[2] as i32 + dz];
                        if q.iter().any(|&v| v < 0 || v >= size as i32) {
                            continue;
                        }
                        let q = [q[0] as u32, q[1] as u32, q[2] as u32];
                        if cnt[at(q)] == 0 {
                            continue;
                        }
                        let o = offset_index([dx, dy, dz]);
                        for j in 0..c {
                            for k in 0..c {
                                y[(r, j)] += sum[at(q)][k] / cnt[at(q)] as f64 * w[(o * c + k, j)];
                            }
                        }
                    }
                }
            }
        }
        y
    }

    #[test]
    fn adjacent_cells_match_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cells = [[2, 2, 2], [3, 2, 2], [3, 2, 2], [2, 3, 3], [6, 6, 6]];
        let x = random(&mut rng, cells.len(), 3);
        let w = random(&mut rng, 81, 3);
        let (y, _) = sparse_neighborhood_conv(&x, &NeighborhoodIndex::new(&cells), &w).unwrap();
        assert!(y.max_abs_diff(&dense_oracle(&x, &cells, &w)) < 1e-12);
    }

    #[test]
    fn random_cells_match_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cells: Vec<[u32; 3]> = (0..60).map(|_| [rng.gen_range(0..8), rng.gen_range(0..8), rng.gen_range(0..3)]).collect();
        let x = random(&mut rng, 60, 4);
        let w = random(&mut rng, 108, 4);
        let (y, _) = sparse_neighborhood_conv(&x, &NeighborhoodIndex::new(&cells), &w).unwrap();
        assert!(y.max_abs_diff(&dense_oracle(&x, &cells, &w)) < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let x = FeatureMatrix::zeros(2, 3);
        let idx = NeighborhoodIndex::new(&[[0, 0, 0]]);
        assert!(sparse_neighborhood_conv(&x, &idx, &FeatureMatrix::zeros(81, 3)).is_err());
        let idx = NeighborhoodIndex::new(&[[0, 0, 0], [0, 0, 0]]);
        assert!(sparse_neighborhood_conv(&x, &idx, &FeatureMatrix::zeros(27, 3)).is_err());
    }
}
