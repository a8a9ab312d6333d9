use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xtcd::kernels::{
    linear, patch_attention, patch_attention_backward, sparse_neighborhood_conv, AttentionParams, FeatureMatrix,
    NeighborhoodIndex,
};
use xtcd::serialization::{hilbert_code, morton_code, partition_patches, Curve, SerializationConfig, SerializedOrder};
use xtcd::{build_order, merge_epochs, BiTemporalSample, EpochPointSet};

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> FeatureMatrix {
    FeatureMatrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

fn codes(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cells: Vec<[u32; 3]> = (0..10_000).map(|_| [0; 3].map(|_| rng.gen_range(0..1 << 16))).collect();
    c.bench_function("morton_code_10k", |b| {
        b.iter(|| cells.iter().map(|p| morton_code(p[0], p[1], p[2], 16).unwrap()).fold(0, u64::wrapping_add))
    });
    c.bench_function("hilbert_code_10k", |b| {
        b.iter(|| cells.iter().map(|p| hilbert_code(p[0], p[1], p[2], 16).unwrap()).fold(0, u64::wrapping_add))
    });
}

fn serialization(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut pts = |n: usize| {
        EpochPointSet::new((0..n).map(|_| [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(0.0..5.0)]).collect())
    };
    let merged = merge_epochs(&BiTemporalSample::new(pts(4000), pts(6000)), true);
    let batch = vec![0; merged.len()];
    let mut group = c.benchmark_group("build_order_10k");
    for curve in Curve::SCHEDULE {
        let cfg = SerializationConfig::new(curve, 0.5);
        group.bench_with_input(BenchmarkId::from_parameter(curve.name()), &cfg, |b, cfg| {
            b.iter(|| build_order(&merged, cfg, &batch).unwrap())
        });
    }
    group.finish();
}

fn attention(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 1024;
    let mut group = c.benchmark_group("patch_attention_1024");
    for ch in [16usize, 32] {
        let x = random_matrix(&mut rng, n, ch, 1.0);
        let w: Vec<FeatureMatrix> = (0..4).map(|_| random_matrix(&mut rng, ch, ch, 0.3)).collect();
        let bias = vec![0.0; ch];
        let p = AttentionParams {
            query: (&w[0], &bias),
            key: (&w[1], &bias),
            value: (&w[2], &bias),
            output: (&w[3], &bias),
        };
        let order = SerializedOrder {
            permutation: (0..n).collect(),
            codes: vec![0; n],
            patch_bounds: partition_patches(n, 1024),
        };
        group.bench_with_input(BenchmarkId::new("forward", ch), &ch, |b, _| {
            b.iter(|| patch_attention(black_box(&x), &order, 4, &p).unwrap())
        });
        let (y, cache) = patch_attention(&x, &order, 4, &p).unwrap();
        group.bench_with_input(BenchmarkId::new("backward", ch), &ch, |b, _| {
            b.iter(|| patch_attention_backward(&cache, &order, &p, black_box(&y)))
        });
    }
    group.finish();
}

fn conv_and_linear(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 2000;
    let ch = 32;
    let x = random_matrix(&mut rng, n, ch, 1.0);
    let cells: Vec<[u32; 3]> = (0..n).map(|_| [rng.gen_range(0..30), rng.gen_range(0..30), rng.gen_range(0..4)]).collect();
    let index = NeighborhoodIndex::new(&cells);
    let w = random_matrix(&mut rng, 27 * ch, ch, 0.1);
    c.bench_function("sparse_conv_2000x32", |b| b.iter(|| sparse_neighborhood_conv(black_box(&x), &index, &w).unwrap()));
    let w1 = random_matrix(&mut rng, ch, 4 * ch, 0.3);
    let b1 = vec![0.0; 4 * ch];
    c.bench_function("linear_2000x32x128", |b| b.iter(|| linear(black_box(&x), &w1, &b1).unwrap()));
}

criterion_group!(benches, codes, serialization, attention, conv_and_linear);
criterion_main!(benches);
