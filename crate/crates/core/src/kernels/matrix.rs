use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Row-major `rows × cols` matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        FeatureMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!("{} values for a {rows}x{cols} matrix", data.len())));
        }
        Ok(FeatureMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Ok(FeatureMatrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn add_assign(&mut self, other: &FeatureMatrix) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn add(&self, other: &FeatureMatrix) -> FeatureMatrix {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn max_abs_diff(&self, other: &FeatureMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Rows at `indices`, in that order.
    pub fn gather_rows(&self, indices: &[usize]) -> FeatureMatrix {
        let mut out = FeatureMatrix::zeros(indices.len(), self.cols);
        for (o, &i) in indices.iter().enumerate() {
            out.row_mut(o).copy_from_slice(self.row(i));
        }
        out
    }

    /// Horizontal concatenation.
    pub fn concat_cols(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.rows != other.rows {
            return Err(Error::Shape(format!("concat of {} and {} rows", self.rows, other.rows)));
        }
        let cols = self.cols + other.cols;
        let mut out = FeatureMatrix::zeros(self.rows, cols);
        for i in 0..self.rows {
            let r = out.row_mut(i);
            r[..self.cols].copy_from_slice(self.row(i));
            r[self.cols..].copy_from_slice(other.row(i));
        }
        Ok(out)
    }

    /// Inverse of [`concat_cols`](Self::concat_cols): splits after column `at`.
    pub fn split_cols(&self, at: usize) -> (FeatureMatrix, FeatureMatrix) {
        let mut a = FeatureMatrix::zeros(self.rows, at);
        let mut b = FeatureMatrix::zeros(self.rows, self.cols - at);
        for i in 0..self.rows {
            let r = self.row(i);
            a.row_mut(i).copy_from_slice(&r[..at]);
            b.row_mut(i).copy_from_slice(&r[at..]);
        }
        (a, b)
    }
}

impl Index<(usize, usize)> for FeatureMatrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for FeatureMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// `a · b`.
pub fn matmul(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<FeatureMatrix> {
    if a.cols != b.rows {
        return Err(Error::Shape(format!("{:?} · {:?}", a.shape(), b.shape())));
    }
    let mut out = FeatureMatrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let o = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &av) in a.row(i).iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (ov, bv) in o.iter_mut().zip(b.row(k)) {
                *ov += av * bv;
            }
        }
    }
    Ok(out)
}

/// `aᵀ · b`, accumulated into `out`.
pub fn matmul_at_b_acc(a: &FeatureMatrix, b: &FeatureMatrix, out: &mut FeatureMatrix) {
    assert_eq!(a.rows, b.rows);
    assert_eq!(out.shape(), (a.cols, b.cols));
    for i in 0..a.rows {
        let br = b.row(i);
        for (k, &av) in a.row(i).iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (ov, bv) in out.row_mut(k).iter_mut().zip(br) {
                *ov += av * bv;
            }
        }
    }
}

/// `a · bᵀ`.
pub fn matmul_a_bt(a: &FeatureMatrix, b: &FeatureMatrix) -> FeatureMatrix {
    assert_eq!(a.cols, b.cols);
    let mut out = FeatureMatrix::zeros(a.rows, b.rows);
    for i in 0..a.rows {
        let ar = a.row(i);
        for j in 0..b.rows {
            out.data[i * b.rows + j] = dot(ar, b.row(j));
        }
    }
    out
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_variants_agree() {
        let a = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let b = FeatureMatrix::from_rows(&[vec![1.0, 0.5, -1.0], vec![2.0, 0.0, 1.0]]).unwrap();
        let ab = matmul(&a, &b).unwrap();
        assert_eq!(ab.row(0), &[5.0, 0.5, 1.0]);
        let bt = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![0.5, 0.0], vec![-1.0, 1.0]]).unwrap();
        assert_eq!(matmul_a_bt(&a, &bt), ab);
        // aᵀ · ab via an explicit transpose
        let at = FeatureMatrix::from_rows(&[vec![1.0, 3.0, 5.0], vec![2.0, 4.0, 6.0]]).unwrap();
        let mut atb = FeatureMatrix::zeros(2, 3);
        matmul_at_b_acc(&a, &ab, &mut atb);
        let mut expected = FeatureMatrix::zeros(2, 3);
        for i in 0..3 {
            for k in 0..2 {
                for j in 0..3 {
                    expected[(k, j)] += at[(k, i)] * ab[(i, j)];
                }
            }
        }
        assert_eq!(atb, expected);
        assert!(matmul(&a, &a).is_err());
    }

    #[test]
    fn concat_split_inverse() {
        let a = FeatureMatrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        let b = FeatureMatrix::from_rows(&[vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let c = a.concat_cols(&b).unwrap();
        assert_eq!(c.row(1), &[2.0, 5.0, 6.0]);
        assert_eq!(c.split_cols(1), (a, b));
    }
}
