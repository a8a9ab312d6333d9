use xtcd::datagen::{generate_scene_pair, scene_seed, SceneSpec};
use xtcd::model::write_checkpoint;
use xtcd::training::{evaluate, fit, RunConfig};
use xtcd::{BiTemporalSample, Error, ModelConfig};

fn scenes(master: u64, n: usize) -> Vec<BiTemporalSample> {
    (0..n)
        .map(|i| {
            generate_scene_pair(&SceneSpec {
                extent: 24.0,
                building_count: (1, 2),
                building_size: (5.0, 8.0),
                vegetation_count: 3,
                clutter_count: 4,
                seed: scene_seed(master, i as u64),
                ..SceneSpec::default()
            })
            .unwrap()
        })
        .collect()
}

fn tiny_config(seed: u64) -> RunConfig {
    let mut cfg = RunConfig::desk();
    cfg.model = ModelConfig::miniature(1.0);
    cfg.model.patch_capacity = 64;
    cfg.train.epochs = 2;
    cfg.train.samples_per_epoch = 4;
    cfg.train.radius = 5.0;
    cfg.train.max_lr = 2e-3;
    cfg.train.seed = seed;
    cfg
}

fn checkpoint_bytes(cfg: &RunConfig, train: &[BiTemporalSample], val: &[BiTemporalSample]) -> (Vec<u8>, Vec<f64>) {
    let result = fit(train, val, cfg, |_| {}).unwrap();
    let mut bytes = Vec::new();
    write_checkpoint(&result.best, &mut bytes).unwrap();
    (bytes, result.history.iter().map(|r| r.train_loss).collect())
}

#[test]
fn same_seed_gives_byte_identical_checkpoints() {
    let train = scenes(1, 2);
    let val = scenes(2, 1);
    let (a, ha) = checkpoint_bytes(&tiny_config(5), &train, &val);
    let (b, hb) = checkpoint_bytes(&tiny_config(5), &train, &val);
    assert_eq!(a, b);
    assert_eq!(ha, hb);
    let (c, _) = checkpoint_bytes(&tiny_config(6), &train, &val);
    assert_ne!(a, c);
}

#[test]
fn history_has_one_record_per_epoch() {
    let train = scenes(3, 2);
    let val = scenes(4, 1);
    let mut seen = Vec::new();
    let result = fit(&train, &val, &tiny_config(1), |r| seen.push(r.epoch)).unwrap();
    assert_eq!(seen, vec![1, 2]);
    assert_eq!(result.history.len(), 2);
    assert!(result.history.iter().all(|r| r.train_loss.is_finite() && r.val_cd_miou.is_some()));
    let best = result.history[result.best_epoch - 1].val_cd_miou.unwrap();
    assert!(result.history.iter().all(|r| r.val_cd_miou.unwrap() <= best));
    // The best checkpoint reproduces its recorded validation score.
    let report = evaluate(&result.best, &val, 1.0, 5.0).unwrap();
    assert_eq!(report.cd.mean_iou().unwrap(), best);
}

#[test]
fn zero_samples_per_epoch_is_an_error() {
    let mut cfg = tiny_config(0);
    cfg.train.samples_per_epoch = 0;
    let err = fit(&scenes(5, 1), &[], &cfg, |_| {}).unwrap_err();
    assert!(matches!(err, Error::EmptySupervision), "{err}");
}

#[test]
fn scenes_without_change_labels_are_rejected() {
    let mut train = scenes(6, 1);
    train[0].t1.change_labels = None;
    let err = fit(&train, &[], &tiny_config(0), |_| {}).unwrap_err();
    assert!(matches!(err, Error::MissingLabels("change")), "{err}");
}

#[test]
fn without_multitask_semantic_labels_are_optional() {
    let mut train = scenes(7, 1);
    train[0].t0.semantic_labels = None;
    train[0].t1.semantic_labels = None;
    let mut cfg = tiny_config(0);
    assert!(matches!(fit(&train, &[], &cfg, |_| {}), Err(Error::MissingLabels("semantic"))));
    cfg.model.mt_enabled = false;
    let result = fit(&train, &[], &cfg, |_| {}).unwrap();
    assert_eq!(result.best_epoch, 2);
}
