use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use xtcd::datagen::{generate_scene_pair, SceneSpec};
use xtcd::training::{draw_sample, optimizer_step, total_loss, TrainConfig};
use xtcd::{Model, ModelConfig};

fn desk_step(c: &mut Criterion) {
    let scene = generate_scene_pair(&SceneSpec {
        extent: 40.0,
        building_count: (2, 3),
        seed: 9,
        ..SceneSpec::default()
    })
    .unwrap();
    let cfg = TrainConfig {
        radius: 8.0,
        ..TrainConfig::desk()
    };
    let bounds = vec![scene.bounds().unwrap()];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let sample = draw_sample(std::slice::from_ref(&scene), &bounds, &cfg, true, &mut rng).unwrap();
    let mut model = Model::new(ModelConfig::desk(cfg.voxel), 0).unwrap();

    let mut group = c.benchmark_group("desk_model");
    group.sample_size(10);
    group.bench_function("forward", |b| b.iter(|| model.forward(&sample).unwrap()));
    group.bench_function("train_step", |b| {
        b.iter(|| {
            let (out, state) = model.forward_with_state(&sample).unwrap();
            let loss = total_loss(&out, &sample, cfg.alpha, cfg.beta).unwrap();
            model.params.zero_grads();
            model.backward(&state, loss.dss.as_ref(), &loss.dcd).unwrap();
            optimizer_step(&mut model.params, 0.0, 0.0).unwrap();
        })
    });
    group.finish();
}

criterion_group!(benches, desk_step);
criterion_main!(benches);
