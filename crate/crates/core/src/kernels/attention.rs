//! Multi-head scaled dot-product attention restricted to serialized patches.
//!
//! Rows only attend to rows of the same patch. Queries, keys and values are
//! separate linear projections of the input; head outputs are concatenated
//! and passed through an output projection.

use super::dense::{linear, linear_backward, softmax_in_place};
use super::matrix::FeatureMatrix;
use crate::error::{Error, Result};
use crate::serialization::SerializedOrder;

/// Borrowed projection weights `(W, bias)` for query, key, value and output.
#[derive(Clone, Copy)]
pub struct AttentionParams<'a> {
    pub query: (&'a FeatureMatrix, &'a [f64]),
    pub key: (&'a FeatureMatrix, &'a [f64]),
    pub value: (&'a FeatureMatrix, &'a [f64]),
    pub output: (&'a FeatureMatrix, &'a [f64]),
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    x: FeatureMatrix,
    q: FeatureMatrix,
    k: FeatureMatrix,
    v: FeatureMatrix,
    context: FeatureMatrix,
    /// Softmax weights per (patch, head), each `n × n` row-major.
    probs: Vec<Vec<f64>>,
    heads: usize,
}

#[derive(Debug, Clone)]
pub struct AttentionGrads {
    pub dx: FeatureMatrix,
    /// `(dW, dbias)` for query, key, value, output in that order.
    pub params: [(FeatureMatrix, Vec<f64>); 4],
}

fn check_patches(order: &SerializedOrder, n: usize) -> Result<()> {
    if order.permutation.len() != n {
        return Err(Error::Shape(format!("patches cover {} of {n} rows", order.permutation.len())));
    }
    let mut expected = 0;
    for &(s, e) in &order.patch_bounds {
        if s != expected || e < s {
            return Err(Error::Shape("patch bounds are not contiguous".into()));
        }
        expected = e;
    }
    if expected != n {
        return Err(Error::Shape(format!("patch bounds end at {expected}, expected {n}")));
    }
    Ok(())
}

/// Copies columns `h*ch .. (h+1)*ch` of the listed rows into a dense `n × ch` block.
fn gather_head(m: &FeatureMatrix, rows: &[usize], h: usize, ch: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows.len() * ch);
    for &r in rows {
        out.extend_from_slice(&m.row(r)[h * ch..(h + 1) * ch]);
    }
    out
}

/// Same block, channel-major (`ch × n`), so loops over the patch run on contiguous memory.
fn gather_head_t(m: &FeatureMatrix, rows: &[usize], h: usize, ch: usize) -> Vec<f64> {
    let n = rows.len();
    let mut out = vec![0.0; n * ch];
    for (j, &r) in rows.iter().enumerate() {
        for (t, &v) in m.row(r)[h * ch..(h + 1) * ch].iter().enumerate() {
            out[t * n + j] = v;
        }
    }
    out
}

fn scatter_head_t(block: &[f64], rows: &[usize], h: usize, ch: usize, m: &mut FeatureMatrix) {
    let n = rows.len();
    for (j, &r) in rows.iter().enumerate() {
        let dst = &mut m.row_mut(r)[h * ch..(h + 1) * ch];
        for (t, d) in dst.iter_mut().enumerate() {
            *d = block[t * n + j];
        }
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Dot product with four interleaved partial sums; the fixed split keeps results reproducible.
fn dot_lanes(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn patch_attention(
    x: &FeatureMatrix,
    order: &SerializedOrder,
    heads: usize,
    params: &AttentionParams,
) -> Result<(FeatureMatrix, AttentionCache)> {
    let c = x.cols();
    if heads == 0 || c % heads != 0 {
        return Err(Error::Shape(format!("{c} channels not divisible by {heads} heads")));
    }
    check_patches(order, x.rows())?;
    let ch = c / heads;
    let scale = 1.0 / (ch as f64).sqrt();

    let q = linear(x, params.query.0, params.query.1)?;
    let k = linear(x, params.key.0, params.key.1)?;
    let v = linear(x, params.value.0, params.value.1)?;
    if q.cols() != c || k.cols() != c || v.cols() != c {
        return Err(Error::Shape("projections must preserve the channel count".into()));
    }

    let mut context = FeatureMatrix::zeros(x.rows(), c);
    let mut probs = Vec::with_capacity(order.patch_bounds.len() * heads);
    for rows in order.patches() {
        let n = rows.len();
        for h in 0..heads {
            let qh = gather_head(&q, rows, h, ch);
            let kt = gather_head_t(&k, rows, h, ch);
            let vt = gather_head_t(&v, rows, h, ch);
            let mut p = vec![0.0; n * n];
            for (i, prow) in p.chunks_exact_mut(n).enumerate() {
                let qi = &qh[i * ch..(i + 1) * ch];
                for t in 0..ch {
                    axpy(prow, qi[t] * scale, &kt[t * n..(t + 1) * n]);
                }
                softmax_in_place(prow);
                let out = &mut context.row_mut(rows[i])[h * ch..(h + 1) * ch];
                for (t, o) in out.iter_mut().enumerate() {
                    *o = dot_lanes(prow, &vt[t * n..(t + 1) * n]);
                }
            }
            probs.push(p);
        }
    }

    let y = linear(&context, params.output.0, params.output.1)?;
    Ok((
        y,
        AttentionCache {
            x: x.clone(),
            q,
            k,
            v,
            context,
            probs,
            heads,
        },
    ))
}

pub fn patch_attention_backward(
    cache: &AttentionCache,
    order: &SerializedOrder,
    params: &AttentionParams,
    dy: &FeatureMatrix,
) -> AttentionGrads {
    let c = cache.x.cols();
    let heads = cache.heads;
    let ch = c / heads;
    let scale = 1.0 / (ch as f64).sqrt();

    let out_grads = linear_backward(&cache.context, params.output.0, dy);
    let dcontext = out_grads.dx;
    let mut dq = FeatureMatrix::zeros(cache.x.rows(), c);
    let mut dk = FeatureMatrix::zeros(cache.x.rows(), c);
    let mut dv = FeatureMatrix::zeros(cache.x.rows(), c);

    let mut ds = Vec::new();
    for (pi, rows) in order.patches().enumerate() {
        let n = rows.len();
        ds.resize(n, 0.0);
        for h in 0..heads {
            let p = &cache.probs[pi * heads + h];
            let qh = gather_head(&cache.q, rows, h, ch);
            let kt = gather_head_t(&cache.k, rows, h, ch);
            let vt = gather_head_t(&cache.v, rows, h, ch);
            let dch = gather_head(&dcontext, rows, h, ch);
            let mut dkt = vec![0.0; n * ch];
            let mut dvt = vec![0.0; n * ch];
            for i in 0..n {
                let prow = &p[i * n..(i + 1) * n];
                let dci = &dch[i * ch..(i + 1) * ch];
                // ds starts as dL/dp: the context gradient against each value row.
                ds.fill(0.0);
                for t in 0..ch {
                    axpy(&mut ds, dci[t], &vt[t * n..(t + 1) * n]);
                    axpy(&mut dvt[t * n..(t + 1) * n], dci[t], prow);
                }
                let s = dot_lanes(prow, &ds);
                for (d, &w) in ds.iter_mut().zip(prow) {
                    *d = w * (*d - s) * scale;
                }
                let qi = &qh[i * ch..(i + 1) * ch];
                let dqi = &mut dq.row_mut(rows[i])[h * ch..(h + 1) * ch];
                for t in 0..ch {
                    dqi[t] = dot_lanes(&ds, &kt[t * n..(t + 1) * n]);
                    axpy(&mut dkt[t * n..(t + 1) * n], qi[t], &ds);
                }
            }
            scatter_head_t(&dkt, rows, h, ch, &mut dk);
            scatter_head_t(&dvt, rows, h, ch, &mut dv);
        }
    }

    let gq = linear_backward(&cache.x, params.query.0, &dq);
    let gk = linear_backward(&cache.x, params.key.0, &dk);
    let gv = linear_backward(&cache.x, params.value.0, &dv);
    let mut dx = gq.dx;
    dx.add_assign(&gk.dx);
    dx.add_assign(&gv.dx);
    AttentionGrads {
        dx,
        params: [
            (gq.dw, gq.dbias),
            (gk.dw, gk.dbias),
            (gv.dw, gv.dbias),
            (out_grads.dw, out_grads.dbias),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::serialization::partition_patches;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> FeatureMatrix {
        FeatureMatrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn order(n: usize, k: usize) -> SerializedOrder {
        SerializedOrder {
            permutation: (0..n).collect(),
            codes: vec![0; n],
            patch_bounds: partition_patches(n, k),
        }
    }

    struct Weights {
        w: [FeatureMatrix; 4],
        b: [Vec<f64>; 4],
    }

    impl Weights {
        fn random(rng: &mut ChaCha8Rng, c: usize) -> Self {
            Weights {
                w: std::array::from_fn(|_| random(rng, c, c)),
                b: std::array::from_fn(|_| (0..c).map(|_| rng.gen_range(-0.5..0.5)).collect()),
            }
        }

        fn params(&self) -> AttentionParams<'_> {
            AttentionParams {
                query: (&self.w[0], &self.b[0]),
                key: (&self.w[1], &self.b[1]),
                value: (&self.w[2], &self.b[2]),
                output: (&self.w[3], &self.b[3]),
            }
        }
    }

    #[test]
    fn single_point_patch_is_projected_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = Weights::random(&mut rng, 4);
        let x = random(&mut rng, 1, 4);
        let (y, _) = patch_attention(&x, &order(1, 1), 2, &w.params()).unwrap();
        let v = linear(&x, &w.w[2], &w.b[2]).unwrap();
        let expected = linear(&v, &w.w[3], &w.b[3]).unwrap();
        assert!(y.max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn identical_rows_give_identical_outputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = Weights::random(&mut rng, 8);
        let row: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = FeatureMatrix::from_rows(&vec![row; 5]).unwrap();
        let (y, _) = patch_attention(&x, &order(5, 5), 4, &w.params()).unwrap();
        for i in 1..5 {
            assert_eq!(y.row(i), y.row(0));
        }
    }

    #[test]
    fn two_point_patch_matches_direct_evaluation() {
        let x = FeatureMatrix::from_rows(&[vec![0.3, -1.2], vec![0.8, 0.5]]).unwrap();
        let id = FeatureMatrix::identity(2);
        let z = [0.0; 2];
        let p = AttentionParams {
            query: (&id, &z),
            key: (&id, &z),
            value: (&id, &z),
            output: (&id, &z),
        };
        let (y, _) = patch_attention(&x, &order(2, 2), 1, &p).unwrap();
        // scalar evaluation of sum_j softmax_j(f_i . f_j / sqrt(2)) f_j
        let f = [[0.3, -1.2], [0.8, 0.5]];
        for i in 0..2 {
            let s: Vec<f64> = (0..2).map(|j| (f[i][0] * f[j][0] + f[i][1] * f[j][1]) / 2f64.sqrt()).collect();
            let z: f64 = s.iter().map(|v| v.exp()).sum();
            for c in 0..2 {
                let expected: f64 = (0..2).map(|j| s[j].exp() / z * f[j][c]).sum();
                assert!((y[(i, c)] - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rows_outside_patch_do_not_leak() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = Weights::random(&mut rng, 4);
        let x = random(&mut rng, 9, 4);
        let o = order(9, 3);
        let (y, _) = patch_attention(&x, &o, 2, &w.params()).unwrap();
        let mut x2 = x.clone();
        for r in 3..9 {
            x2.row_mut(r).fill(0.0);
        }
        let (y2, _) = patch_attention(&x2, &o, 2, &w.params()).unwrap();
        for r in 0..3 {
            assert_eq!(y.row(r), y2.row(r));
        }
    }

    #[test]
    fn rejects_bad_heads_and_patches() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = Weights::random(&mut rng, 4);
        let x = random(&mut rng, 4, 4);
        assert!(patch_attention(&x, &order(4, 2), 3, &w.params()).is_err());
        assert!(patch_attention(&x, &order(3, 2), 2, &w.params()).is_err());
    }
}
