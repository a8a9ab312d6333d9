//! Central-difference verification of analytic backward passes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::attention::{patch_attention, patch_attention_backward, AttentionParams};
use super::conv::{sparse_neighborhood_conv, sparse_neighborhood_conv_backward, NeighborhoodIndex};
use super::dense::{gelu, gelu_backward, layer_norm, layer_norm_backward, linear, linear_backward, softmax, softmax_backward, LAYER_NORM_EPS};
use super::loss::cross_entropy_default;
use super::matrix::FeatureMatrix;
use super::pool::{gather_expand, gather_expand_backward, scatter_max_pool, scatter_max_pool_backward};
use crate::serialization::{partition_patches, SerializedOrder};

pub const FD_STEP: f64 = 1e-5;
pub const KERNEL_TOLERANCE: f64 = 1e-5;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}

/// Worst relative error between `backward` and central differences of
/// `Σ R ⊙ forward(inputs)` for a random projection `R`.
pub fn grad_check<F, B>(inputs: &[FeatureMatrix], forward: F, backward: B, rng: &mut impl Rng) -> f64
where
    F: Fn(&[FeatureMatrix]) -> FeatureMatrix,
    B: Fn(&[FeatureMatrix], &FeatureMatrix) -> Vec<FeatureMatrix>,
{
    let out = forward(inputs);
    let proj = FeatureMatrix::from_vec(
        out.rows(),
        out.cols(),
        (0..out.rows() * out.cols()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .expect("projection shape");
    let objective = |ins: &[FeatureMatrix]| -> f64 {
        forward(ins).data().iter().zip(proj.data()).map(|(a, b)| a * b).sum()
    };
    let analytic = backward(inputs, &proj);
    assert_eq!(analytic.len(), inputs.len(), "one gradient per input");

    let mut worst = 0.0f64;
    let mut probe = inputs.to_vec();
    for (t, grad) in analytic.iter().enumerate() {
        assert_eq!(grad.shape(), inputs[t].shape(), "gradient shape for input {t}");
        for e in 0..inputs[t].data().len() {
            let orig = inputs[t].data()[e];
            probe[t].data_mut()[e] = orig + FD_STEP;
            let up = objective(&probe);
            probe[t].data_mut()[e] = orig - FD_STEP;
            let down = objective(&probe);
            probe[t].data_mut()[e] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(grad.data()[e], numeric));
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub kernel: &'static str,
    pub trials: usize,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_rel_error <= tolerance
    }
}

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> FeatureMatrix {
    FeatureMatrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

fn row_vec(v: &[f64]) -> FeatureMatrix {
    FeatureMatrix::from_vec(1, v.len(), v.to_vec()).unwrap()
}

fn check_linear(rng: &mut ChaCha8Rng) -> f64 {
    let inputs = [random(rng, 3, 4, 1.0), random(rng, 4, 2, 1.0), random(rng, 1, 2, 1.0)];
    grad_check(
        &inputs,
        |ins| linear(&ins[0], &ins[1], ins[2].data()).unwrap(),
        |ins, dy| {
            let g = linear_backward(&ins[0], &ins[1], dy);
            vec![g.dx, g.dw, row_vec(&g.dbias)]
        },
        rng,
    )
}

fn check_layer_norm(rng: &mut ChaCha8Rng) -> f64 {
    let inputs = [random(rng, 5, 6, 2.0), random(rng, 1, 6, 1.5), random(rng, 1, 6, 1.0)];
    grad_check(
        &inputs,
        |ins| layer_norm(&ins[0], ins[1].data(), ins[2].data(), LAYER_NORM_EPS).unwrap().0,
        |ins, dy| {
            let (_, cache) = layer_norm(&ins[0], ins[1].data(), ins[2].data(), LAYER_NORM_EPS).unwrap();
            let g = layer_norm_backward(&cache, ins[1].data(), dy);
            vec![g.dx, row_vec(&g.dgain), row_vec(&g.dshift)]
        },
        rng,
    )
}

fn check_softmax(rng: &mut ChaCha8Rng) -> f64 {
    let inputs = [random(rng, 4, 5, 3.0)];
    grad_check(&inputs, |ins| softmax(&ins[0]), |ins, dy| vec![softmax_backward(&softmax(&ins[0]), dy)], rng)
}

fn check_gelu(rng: &mut ChaCha8Rng) -> f64 {
    let inputs = [random(rng, 4, 5, 3.0)];
    grad_check(&inputs, |ins| gelu(&ins[0]), |ins, dy| vec![gelu_backward(&ins[0], dy)], rng)
}

fn attention_params(ins: &[FeatureMatrix]) -> AttentionParams<'_> {
    AttentionParams {
        query: (&ins[1], ins[2].data()),
        key: (&ins[3], ins[4].data()),
        value: (&ins[5], ins[6].data()),
        output: (&ins[7], ins[8].data()),
    }
}

/// Two patches of three points in a shuffled serialization, C = 4, H = 2.
fn check_patch_attention(rng: &mut ChaCha8Rng) -> f64 {
    let c = 4;
    let mut inputs = vec![random(rng, 6, c, 1.0)];
    for _ in 0..4 {
        inputs.push(random(rng, c, c, 0.8));
        inputs.push(random(rng, 1, c, 0.3));
    }
    let order = SerializedOrder {
        permutation: vec![4, 0, 2, 5, 1, 3],
        codes: vec![0; 6],
        patch_bounds: partition_patches(6, 3),
    };
    grad_check(
        &inputs,
        |ins| patch_attention(&ins[0], &order, 2, &attention_params(ins)).unwrap().0,
        |ins, dy| {
            let p = attention_params(ins);
            let (_, cache) = patch_attention(&ins[0], &order, 2, &p).unwrap();
            let g = patch_attention_backward(&cache, &order, &p, dy);
            let mut out = vec![g.dx];
            for (dw, db) in g.params {
                out.push(dw);
                out.push(row_vec(&db));
            }
            out
        },
        rng,
    )
}

fn check_scatter_max_pool(rng: &mut ChaCha8Rng) -> f64 {
    let mut keys: Vec<usize> = (0..10).map(|_| rng.gen_range(0..4)).collect();
    keys[..4].copy_from_slice(&[0, 1, 2, 3]);
    let coords = vec![[0.0; 3]; 10];
    let inputs = [random(rng, 10, 3, 1.0)];
    grad_check(
        &inputs,
        |ins| scatter_max_pool(&ins[0], &keys, &coords).unwrap().pooled,
        |ins, dy| {
            let out = scatter_max_pool(&ins[0], &keys, &coords).unwrap();
            vec![scatter_max_pool_backward(&out.argmax, 10, dy)]
        },
        rng,
    )
}

fn check_gather_expand(rng: &mut ChaCha8Rng) -> f64 {
    let mut map: Vec<usize> = (0..10).map(|_| rng.gen_range(0..4)).collect();
    map[..4].copy_from_slice(&[0, 1, 2, 3]);
    let inputs = [random(rng, 4, 3, 1.0)];
    grad_check(
        &inputs,
        |ins| gather_expand(&ins[0], &map).unwrap(),
        |_, dy| vec![gather_expand_backward(&map, 4, dy)],
        rng,
    )
}

fn check_sparse_conv(rng: &mut ChaCha8Rng) -> f64 {
    let cells: Vec<[u32; 3]> = (0..8).map(|_| [rng.gen_range(0..3), rng.gen_range(0..3), rng.gen_range(0..2)]).collect();
    let index = NeighborhoodIndex::new(&cells);
    let c = 3;
    let inputs = [random(rng, 8, c, 1.0), random(rng, 27 * c, c, 0.5)];
    grad_check(
        &inputs,
        |ins| sparse_neighborhood_conv(&ins[0], &index, &ins[1]).unwrap().0,
        |ins, dy| {
            let (_, means) = sparse_neighborhood_conv(&ins[0], &index, &ins[1]).unwrap();
            let (dx, dw) = sparse_neighborhood_conv_backward(&index, &ins[1], &means, dy);
            vec![dx, dw]
        },
        rng,
    )
}

fn check_cross_entropy(rng: &mut ChaCha8Rng) -> f64 {
    let labels: Vec<u8> = vec![0, 3, 255, 1, 2];
    let inputs = [random(rng, 5, 4, 2.0)];
    grad_check(
        &inputs,
        |ins| FeatureMatrix::from_vec(1, 1, vec![cross_entropy_default(&ins[0], &labels).unwrap().0]).unwrap(),
        |ins, dy| {
            let (_, mut g) = cross_entropy_default(&ins[0], &labels).unwrap();
            g.data_mut().iter_mut().for_each(|v| *v *= dy[(0, 0)]);
            vec![g]
        },
        rng,
    )
}

type KernelCheck = fn(&mut ChaCha8Rng) -> f64;

pub const KERNEL_CHECKS: [(&str, KernelCheck); 9] = [
    ("linear", check_linear),
    ("layer_norm", check_layer_norm),
    ("softmax", check_softmax),
    ("gelu", check_gelu),
    ("patch_attention", check_patch_attention),
    ("scatter_max_pool", check_scatter_max_pool),
    ("gather_expand", check_gather_expand),
    ("sparse_neighborhood_conv", check_sparse_conv),
    ("cross_entropy", check_cross_entropy),
];

/// Runs every kernel check `trials` times on fresh random inputs.
pub fn run_kernel_suite(trials: usize, seed: u64) -> Vec<GradCheckReport> {
    KERNEL_CHECKS
        .iter()
        .enumerate()
        .map(|(k, &(kernel, check))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let max_rel_error = (0..trials).map(|_| check(&mut rng)).fold(0.0, f64::max);
            GradCheckReport {
                kernel,
                trials,
                max_rel_error,
            }
        })
        .collect()
}
