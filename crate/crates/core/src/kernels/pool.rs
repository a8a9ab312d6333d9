//! Grid pooling by group-wise channel maximum, and the matching unpooling.

use super::matrix::FeatureMatrix;
use crate::error::{Error, Result};
use crate::pointset::Point3;

#[derive(Debug, Clone, PartialEq)]
pub struct PoolOutput {
    pub pooled: FeatureMatrix,
    /// Winning input row for every `(group, channel)`, row-major `groups × C`.
    pub argmax: Vec<usize>,
    /// Mean member coordinate per group.
    pub group_coords: Vec<Point3>,
}

/// Number of groups for dense keys `0..P`, rejecting gaps.
pub fn count_groups(key_of_row: &[usize]) -> Result<usize> {
    let groups = key_of_row.iter().max().map_or(0, |m| m + 1);
    let mut seen = vec![false; groups];
    for &k in key_of_row {
        seen[k] = true;
    }
    if let Some(g) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidArgument(format!("pooling key {g} has no rows")));
    }
    Ok(groups)
}

/// Channel-wise maximum per group. Rows are visited in ascending order and the
/// earliest row wins ties.
pub fn scatter_max_pool(x: &FeatureMatrix, key_of_row: &[usize], coords: &[Point3]) -> Result<PoolOutput> {
    if key_of_row.len() != x.rows() || coords.len() != x.rows() {
        return Err(Error::Shape(format!(
            "{} keys and {} coordinates for {} rows",
            key_of_row.len(),
            coords.len(),
            x.rows()
        )));
    }
    let groups = count_groups(key_of_row)?;
    let c = x.cols();
    let mut pooled = FeatureMatrix::zeros(groups, c);
    pooled.fill(f64::NEG_INFINITY);
    let mut argmax = vec![usize::MAX; groups * c];
    let mut sums = vec![[0.0; 3]; groups];
    let mut counts = vec![0usize; groups];
    for (i, &g) in key_of_row.iter().enumerate() {
        let row = x.row(i);
        let prow = pooled.row_mut(g);
        for j in 0..c {
            if row[j] > prow[j] || argmax[g * c + j] == usize::MAX {
                prow[j] = row[j];
                argmax[g * c + j] = i;
            }
        }
        for a in 0..3 {
            sums[g][a] += coords[i][a];
        }
        counts[g] += 1;
    }
    let group_coords = sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| [s[0] / n as f64, s[1] / n as f64, s[2] / n as f64])
        .collect();
    Ok(PoolOutput {
        pooled,
        argmax,
        group_coords,
    })
}

/// Routes each pooled gradient to its winning row.
pub fn scatter_max_pool_backward(argmax: &[usize], rows: usize, dpooled: &FeatureMatrix) -> FeatureMatrix {
    let c = dpooled.cols();
    let mut dx = FeatureMatrix::zeros(rows, c);
    for g in 0..dpooled.rows() {
        for j in 0..c {
            dx[(argmax[g * c + j], j)] += dpooled[(g, j)];
        }
    }
    dx
}

/// Copies each group's pooled row back to all of its members.
pub fn gather_expand(pooled: &FeatureMatrix, group_of_row: &[usize]) -> Result<FeatureMatrix> {
    if let Some(&g) = group_of_row.iter().find(|&&g| g >= pooled.rows()) {
        return Err(Error::InvalidArgument(format!("row mapped to missing group {g}")));
    }
    Ok(pooled.gather_rows(group_of_row))
}

/// Sums member gradients per group.
pub fn gather_expand_backward(group_of_row: &[usize], groups: usize, dy: &FeatureMatrix) -> FeatureMatrix {
    let mut dp = FeatureMatrix::zeros(groups, dy.cols());
    for (i, &g) in group_of_row.iter().enumerate() {
        for (a, b) in dp.row_mut(g).iter_mut().zip(dy.row(i)) {
            *a += b;
        }
    }
    dp
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pool_example() {
        let x = FeatureMatrix::from_rows(&[vec![1.0, 3.0], vec![3.0, 5.0], vec![2.0, 2.0]]).unwrap();
        let coords = [[0.0, 0.0, 0.0], [2.0, 4.0, 6.0], [1.0, 1.0, 1.0]];
        let out = scatter_max_pool(&x, &[0, 0, 1], &coords).unwrap();
        assert_eq!(out.pooled, FeatureMatrix::from_rows(&[vec![3.0, 5.0], vec![2.0, 2.0]]).unwrap());
        assert_eq!(out.argmax, vec![1, 1, 2, 2]);
        assert_eq!(out.group_coords, vec![[1.0, 2.0, 3.0], [1.0, 1.0, 1.0]]);
    }

    #[test]
    fn identity_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = FeatureMatrix::from_vec(6, 3, (0..18).map(|_| rng.gen()).collect()).unwrap();
        let keys: Vec<usize> = (0..6).collect();
        let out = scatter_max_pool(&x, &keys, &[[0.0; 3]; 6]).unwrap();
        assert_eq!(out.pooled, x);
        assert_eq!(gather_expand(&x, &keys).unwrap(), x);
    }

    #[test]
    fn ties_go_to_earliest_row() {
        let x = FeatureMatrix::from_rows(&[vec![1.0], vec![2.0], vec![2.0]]).unwrap();
        let out = scatter_max_pool(&x, &[0, 0, 0], &[[0.0; 3]; 3]).unwrap();
        assert_eq!(out.argmax, vec![1]);
        let dx = scatter_max_pool_backward(&out.argmax, 3, &FeatureMatrix::from_rows(&[vec![1.0]]).unwrap());
        assert_eq!(dx.data(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn pool_matches_group_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = FeatureMatrix::from_vec(100, 8, (0..800).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let mut keys: Vec<usize> = (0..100).map(|_| rng.gen_range(0..10)).collect();
        keys[..10].copy_from_slice(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]);
        let out = scatter_max_pool(&x, &keys, &vec![[0.0; 3]; 100]).unwrap();
        for g in 0..10 {
            let members: Vec<usize> = (0..100).filter(|&i| keys[i] == g).collect();
            for c in 0..8 {
                let best = members.iter().map(|&i| x[(i, c)]).fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(out.pooled[(g, c)], best);
            }
        }
        // pool then expand: every row equals its group's max row
        let expanded = gather_expand(&out.pooled, &keys).unwrap();
        for i in 0..100 {
            assert_eq!(expanded.row(i), out.pooled.row(keys[i]));
        }
        // the composite is idempotent
        let again = scatter_max_pool(&expanded, &keys, &vec![[0.0; 3]; 100]).unwrap();
        assert_eq!(gather_expand(&again.pooled, &keys).unwrap(), expanded);
    }

    #[test]
    fn expand_single_group() {
        let p = FeatureMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let y = gather_expand(&p, &[0, 0, 0]).unwrap();
        assert_eq!(y.rows(), 3);
        assert!((0..3).all(|i| y.row(i) == [1.0, 2.0]));
        assert!(gather_expand(&p, &[0, 1]).is_err());
    }

    #[test]
    fn rejects_sparse_keys() {
        let x = FeatureMatrix::zeros(2, 1);
        assert!(scatter_max_pool(&x, &[0, 2], &[[0.0; 3]; 2]).is_err());
    }
}
