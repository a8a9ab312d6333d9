//! Pointwise kernels: linear projection, layer normalization, GELU, softmax.

use super::matrix::{matmul, matmul_a_bt, matmul_at_b_acc, FeatureMatrix};
use crate::error::{Error, Result};

/// `x · w + bias` with the bias broadcast over rows.
pub fn linear(x: &FeatureMatrix, w: &FeatureMatrix, bias: &[f64]) -> Result<FeatureMatrix> {
    if bias.len() != w.cols() {
        return Err(Error::Shape(format!("bias of length {} for {} outputs", bias.len(), w.cols())));
    }
    let mut y = matmul(x, w)?;
    for i in 0..y.rows() {
        for (v, b) in y.row_mut(i).iter_mut().zip(bias) {
            *v += b;
        }
    }
    Ok(y)
}

pub struct LinearGrads {
    pub dx: FeatureMatrix,
    pub dw: FeatureMatrix,
    pub dbias: Vec<f64>,
}

pub fn linear_backward(x: &FeatureMatrix, w: &FeatureMatrix, dy: &FeatureMatrix) -> LinearGrads {
    let dx = matmul_a_bt(dy, w);
    let mut dw = FeatureMatrix::zeros(w.rows(), w.cols());
    matmul_at_b_acc(x, dy, &mut dw);
    let mut dbias = vec![0.0; w.cols()];
    for i in 0..dy.rows() {
        for (b, g) in dbias.iter_mut().zip(dy.row(i)) {
            *b += g;
        }
    }
    LinearGrads { dx, dw, dbias }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Saved statistics for the layer-norm backward pass.
#[derive(Debug, Clone)]
pub struct LayerNormCache {
    pub normalized: FeatureMatrix,
    pub inv_std: Vec<f64>,
}

pub fn layer_norm(x: &FeatureMatrix, gain: &[f64], shift: &[f64], eps: f64) -> Result<(FeatureMatrix, LayerNormCache)> {
    let c = x.cols();
    if gain.len() != c || shift.len() != c {
        return Err(Error::Shape(format!("norm parameters of length {}/{} for {c} channels", gain.len(), shift.len())));
    }
    let mut y = FeatureMatrix::zeros(x.rows(), c);
    let mut normalized = FeatureMatrix::zeros(x.rows(), c);
    let mut inv_std = Vec::with_capacity(x.rows());
    for i in 0..x.rows() {
        let row = x.row(i);
        let mean = row.iter().sum::<f64>() / c as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
        let r = 1.0 / (var + eps).sqrt();
        inv_std.push(r);
        let nrow = normalized.row_mut(i);
        for (n, v) in nrow.iter_mut().zip(row) {
            *n = (v - mean) * r;
        }
        for j in 0..c {
            y[(i, j)] = normalized[(i, j)] * gain[j] + shift[j];
        }
    }
    Ok((y, LayerNormCache { normalized, inv_std }))
}

pub struct LayerNormGrads {
    pub dx: FeatureMatrix,
    pub dgain: Vec<f64>,
    pub dshift: Vec<f64>,
}

pub fn layer_norm_backward(cache: &LayerNormCache, gain: &[f64], dy: &FeatureMatrix) -> LayerNormGrads {
    let c = dy.cols();
    let mut dx = FeatureMatrix::zeros(dy.rows(), c);
    let mut dgain = vec![0.0; c];
    let mut dshift = vec![0.0; c];
    let mut dn = vec![0.0; c];
    for i in 0..dy.rows() {
        let g = dy.row(i);
        let n = cache.normalized.row(i);
        for j in 0..c {
            dgain[j] += g[j] * n[j];
            dshift[j] += g[j];
            dn[j] = g[j] * gain[j];
        }
        let mean_dn = dn.iter().sum::<f64>() / c as f64;
        let mean_dn_n = dn.iter().zip(n).map(|(a, b)| a * b).sum::<f64>() / c as f64;
        let r = cache.inv_std[i];
        for (j, d) in dx.row_mut(i).iter_mut().enumerate() {
            *d = r * (dn[j] - mean_dn - n[j] * mean_dn_n);
        }
    }
    LayerNormGrads { dx, dgain, dshift }
}

const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_C: f64 = 0.044_715;

/// Tanh-form Gaussian error linear unit.
pub fn gelu(x: &FeatureMatrix) -> FeatureMatrix {
    let mut y = x.clone();
    for v in y.data_mut() {
        let u = *v;
        *v = 0.5 * u * (1.0 + (GELU_K * (u + GELU_C * u * u * u)).tanh());
    }
    y
}

pub fn gelu_backward(x: &FeatureMatrix, dy: &FeatureMatrix) -> FeatureMatrix {
    let mut dx = dy.clone();
    for (d, &u) in dx.data_mut().iter_mut().zip(x.data()) {
        let t = (GELU_K * (u + GELU_C * u * u * u)).tanh();
        let dt = GELU_K * (1.0 + 3.0 * GELU_C * u * u) * (1.0 - t * t);
        *d *= 0.5 * (1.0 + t) + 0.5 * u * dt;
    }
    dx
}

/// Max-subtracted softmax of one row, in place.
pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    let inv = 1.0 / sum;
    for v in row.iter_mut() {
        *v *= inv;
    }
}

/// Row-wise softmax.
pub fn softmax(logits: &FeatureMatrix) -> FeatureMatrix {
    let mut p = logits.clone();
    for i in 0..p.rows() {
        softmax_in_place(p.row_mut(i));
    }
    p
}

/// Gradient through a row softmax given its output `p`.
pub fn softmax_backward(p: &FeatureMatrix, dy: &FeatureMatrix) -> FeatureMatrix {
    let mut dx = FeatureMatrix::zeros(p.rows(), p.cols());
    for i in 0..p.rows() {
        let pr = p.row(i);
        let g = dy.row(i);
        let s: f64 = pr.iter().zip(g).map(|(a, b)| a * b).sum();
        for (j, d) in dx.row_mut(i).iter_mut().enumerate() {
            *d = pr[j] * (g[j] - s);
        }
    }
    dx
}
