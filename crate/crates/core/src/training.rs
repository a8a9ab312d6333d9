//! Multi-task loss, AdamW, the one-cycle schedule, the sampling loop and
//! scene-level evaluation.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernels::loss::cross_entropy_default;
use crate::kernels::{FeatureMatrix, ParamStore};
use crate::keyvalue::{join, parse_array, parse_bool, parse_value, split_pair};
use crate::model::{argmax_rows, ForwardOutput, Model, ModelConfig, CHANGE_CLASSES, SEMANTIC_CLASSES};
use crate::pointset::{cylinder_indices, voxel_downsample_map, BiTemporalSample, EpochPointSet, IGNORED};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
pub const WARMUP_FRACTION: f64 = 0.3;
pub const WARMUP_START: f64 = 0.1;
pub const FINAL_LR_DIVISOR: f64 = 1e4;
const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub alpha: f64,
    pub beta: f64,
    pub max_lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub samples_per_epoch: usize,
    pub voxel: f64,
    pub radius: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Settings of the synthetic benchmark: about half an hour on one core.
    pub fn desk() -> Self {
        TrainConfig {
            alpha: 0.5,
            beta: 0.5,
            max_lr: 3e-3,
            weight_decay: 0.01,
            epochs: 10,
            samples_per_epoch: 800,
            voxel: 1.0,
            radius: 8.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0) || self.alpha + self.beta == 0.0 {
            return Err(Error::Config("alpha and beta must be non-negative and not both zero".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.max_lr >= 0.0 && self.weight_decay >= 0.0) {
            return Err(Error::Config("learning rate and weight decay must be non-negative".into()));
        }
        if !(self.voxel > 0.0 && self.radius > 0.0) {
            return Err(Error::Config("voxel size and radius must be positive".into()));
        }
        Ok(())
    }
}

/// Everything a training run needs: the training knobs and the network shape.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub model: ModelConfig,
}

pub const RUN_CONFIG_KEYS: [&str; 16] = [
    "alpha",
    "beta",
    "max_lr",
    "weight_decay",
    "epochs",
    "samples_per_epoch",
    "voxel",
    "radius",
    "seed",
    "ti_enabled",
    "mt_enabled",
    "patch_capacity",
    "heads",
    "channels",
    "encoder_depths",
    "decoder_depths",
];

impl RunConfig {
    pub fn desk() -> Self {
        let train = TrainConfig::desk();
        RunConfig {
            model: ModelConfig::desk(train.voxel),
            train,
        }
    }

    /// Parses the flat `key=value` form. Every key must appear exactly once;
    /// blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::desk();
        let mut seen: Vec<&str> = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = split_pair(line)?;
            let Some(&key) = RUN_CONFIG_KEYS.iter().find(|&&key| key == k) else {
                return Err(Error::Config(format!("unknown key {k:?}")));
            };
            if seen.contains(&key) {
                return Err(Error::Config(format!("duplicate key {k:?}")));
            }
            seen.push(key);
            let (t, m) = (&mut cfg.train, &mut cfg.model);
            match key {
                "alpha" => t.alpha = parse_value(k, v)?,
                "beta" => t.beta = parse_value(k, v)?,
                "max_lr" => t.max_lr = parse_value(k, v)?,
                "weight_decay" => t.weight_decay = parse_value(k, v)?,
                "epochs" => t.epochs = parse_value(k, v)?,
                "samples_per_epoch" => t.samples_per_epoch = parse_value(k, v)?,
                "voxel" => t.voxel = parse_value(k, v)?,
                "radius" => t.radius = parse_value(k, v)?,
                "seed" => t.seed = parse_value(k, v)?,
                "ti_enabled" => m.ti_enabled = parse_bool(k, v)?,
                "mt_enabled" => m.mt_enabled = parse_bool(k, v)?,
                "patch_capacity" => m.patch_capacity = parse_value(k, v)?,
                "heads" => m.heads = parse_value(k, v)?,
                "channels" => m.channels = parse_array(k, v)?,
                "encoder_depths" => m.encoder_depths = parse_array(k, v)?,
                _ => m.decoder_depths = parse_array(k, v)?,
            }
        }
        if let Some(missing) = RUN_CONFIG_KEYS.iter().find(|k| !seen.contains(k)) {
            return Err(Error::Config(format!("missing key {missing:?}")));
        }
        cfg.sync_grids();
        cfg.train.validate()?;
        cfg.model.validate()?;
        Ok(cfg)
    }

    /// Keeps the network grids tied to the sampling voxel size.
    pub fn sync_grids(&mut self) {
        self.model.voxel = self.train.voxel;
        self.model.base_grid = 2.0 * self.train.voxel;
    }

    pub fn format(&self) -> String {
        let (t, m) = (&self.train, &self.model);
        let mut s = String::new();
        let lines = [
            ("alpha", t.alpha.to_string()),
            ("beta", t.beta.to_string()),
            ("max_lr", t.max_lr.to_string()),
            ("weight_decay", t.weight_decay.to_string()),
            ("epochs", t.epochs.to_string()),
            ("samples_per_epoch", t.samples_per_epoch.to_string()),
            ("voxel", t.voxel.to_string()),
            ("radius", t.radius.to_string()),
            ("seed", t.seed.to_string()),
            ("ti_enabled", m.ti_enabled.to_string()),
            ("mt_enabled", m.mt_enabled.to_string()),
            ("patch_capacity", m.patch_capacity.to_string()),
            ("heads", m.heads.to_string()),
            ("channels", join(&m.channels)),
            ("encoder_depths", join(&m.encoder_depths)),
            ("decoder_depths", join(&m.decoder_depths)),
        ];
        for (k, v) in lines {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        RunConfig::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// `α·L_cd + β·L_ss`, dropping the semantic term when the branch is off.
pub fn combine_losses(cd: f64, ss: f64, alpha: f64, beta: f64, mt_enabled: bool) -> f64 {
    if mt_enabled {
        alpha * cd + beta * ss
    } else {
        alpha * cd
    }
}

#[derive(Debug, Clone)]
pub struct LossTerms {
    pub total: f64,
    pub cd: f64,
    pub ss: Option<f64>,
    /// Gradients of `total` with respect to the change and semantic logits.
    pub dcd: FeatureMatrix,
    pub dss: Option<FeatureMatrix>,
}

/// Semantic labels of both epochs stacked like the merged rows.
pub fn merged_semantic_labels(sample: &BiTemporalSample) -> Vec<u8> {
    (0..2u8)
        .flat_map(|e| {
            let ps = sample.epoch(e);
            (0..ps.len()).map(move |i| ps.semantic_label(i))
        })
        .collect()
}

pub fn t1_change_labels(sample: &BiTemporalSample) -> Vec<u8> {
    (0..sample.t1.len()).map(|i| sample.t1.change_label(i)).collect()
}

/// Weighted multi-task loss of one forward pass against the sample's labels.
pub fn total_loss(out: &ForwardOutput, sample: &BiTemporalSample, alpha: f64, beta: f64) -> Result<LossTerms> {
    let (cd, mut dcd) = cross_entropy_default(&out.cd_logits, &t1_change_labels(sample))?;
    dcd.data_mut().iter_mut().for_each(|g| *g *= alpha);
    let (ss, dss) = match &out.ss_logits {
        Some(logits) => {
            let (l, mut g) = cross_entropy_default(logits, &merged_semantic_labels(sample))?;
            g.data_mut().iter_mut().for_each(|v| *v *= beta);
            (Some(l), Some(g))
        }
        None => (None, None),
    };
    Ok(LossTerms {
        total: combine_losses(cd, ss.unwrap_or(0.0), alpha, beta, ss.is_some()),
        cd,
        ss,
        dcd,
        dss,
    })
}

/// One AdamW update from the accumulated gradients. Nothing changes if any
/// gradient is non-finite.
pub fn optimizer_step(params: &mut ParamStore, lr: f64, weight_decay: f64) -> Result<()> {
    if let Some(p) = params.iter().find(|p| !p.grad.is_finite()) {
        return Err(Error::NonFiniteGradient(p.name.clone()));
    }
    params.step += 1;
    let t = params.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for p in params.iter_mut() {
        let wd = if p.kind.decays() { weight_decay } else { 0.0 };
        let [m, v] = &mut p.moments;
        for (((theta, &g), m), v) in p.value.data_mut().iter_mut().zip(p.grad.data()).zip(m.data_mut()).zip(v.data_mut()) {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let mhat = *m / c1;
            let vhat = *v / c2;
            *theta -= lr * (mhat / (vhat.sqrt() + ADAM_EPS) + wd * *theta);
        }
    }
    Ok(())
}

/// One-cycle schedule: linear warm-up from `0.1·max` to `max` over the first
/// 30% of steps, then cosine decay reaching `max/10⁴` at the last step.
pub fn lr_at(step: usize, total_steps: usize, max_lr: f64) -> f64 {
    let min_lr = max_lr / FINAL_LR_DIVISOR;
    if total_steps <= 1 {
        return max_lr;
    }
    let s = step.min(total_steps - 1) as f64;
    let warm = WARMUP_FRACTION * total_steps as f64;
    if s < warm {
        return max_lr * (WARMUP_START + (1.0 - WARMUP_START) * s / warm);
    }
    let span = (total_steps - 1) as f64 - warm;
    if span <= 0.0 {
        return min_lr;
    }
    let progress = (s - warm) / span;
    min_lr + (max_lr - min_lr) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// C×C counts, rows are ground truth and columns predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != classes * classes {
            return Err(Error::Shape(format!("{} counts for {classes} classes", counts.len())));
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    /// Counts one point; ignored truths are skipped.
    pub fn add(&mut self, truth: u8, pred: u8) {
        if truth == IGNORED {
            return;
        }
        let (t, p) = (truth as usize, pred as usize);
        assert!(t < self.classes && p < self.classes, "label out of range");
        self.counts[t * self.classes + p] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.classes, other.classes);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn overall_accuracy(&self) -> Option<f64> {
        let total = self.total();
        let trace: u64 = (0..self.classes).map(|c| self.get(c, c)).sum();
        (total > 0).then(|| trace as f64 / total as f64)
    }

    /// `TP/(TP+FP+FN)`; `None` when the class occurs in neither truth nor prediction.
    pub fn iou(&self, c: usize) -> Option<f64> {
        let tp = self.get(c, c);
        let fn_: u64 = (0..self.classes).map(|p| self.get(c, p)).sum::<u64>() - tp;
        let fp: u64 = (0..self.classes).map(|t| self.get(t, c)).sum::<u64>() - tp;
        let denom = tp + fp + fn_;
        (denom > 0).then(|| tp as f64 / denom as f64)
    }

    /// Unweighted mean IoU over the classes that occur.
    pub fn mean_iou(&self) -> Option<f64> {
        let ious: Vec<f64> = (0..self.classes).filter_map(|c| self.iou(c)).collect();
        (!ious.is_empty()).then(|| ious.iter().sum::<f64>() / ious.len() as f64)
    }

    pub fn absent_classes(&self) -> Vec<usize> {
        (0..self.classes).filter(|&c| self.iou(c).is_none()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub cd: ConfusionMatrix,
    /// Present when the model has a semantic branch.
    pub ss: Option<ConfusionMatrix>,
}

impl EvalReport {
    /// Human table followed by `metric=<name> class=<id|all> value=<float>` lines.
    pub fn format(&self, cd_names: &[&str], ss_names: &[&str]) -> String {
        let mut s = String::new();
        let section = |s: &mut String, title: &str, prefix: &str, m: &ConfusionMatrix, names: &[&str]| {
            let _ = writeln!(s, "{title}");
            for c in 0..m.classes() {
                let iou = m.iou(c).map_or("n/a".to_string(), |v| format!("{v:.4}"));
                let _ = writeln!(s, "  {:<12} IoU {iou}", names.get(c).copied().unwrap_or("?"));
            }
            let oa = m.overall_accuracy().unwrap_or(f64::NAN);
            let miou = m.mean_iou().unwrap_or(f64::NAN);
            let _ = writeln!(s, "  OA {oa:.4}  mIoU {miou:.4}  points {}", m.total());
            for c in m.absent_classes() {
                let _ = writeln!(s, "  warning: class {c} absent from truth and prediction; left out of mIoU");
            }
            let _ = writeln!(s, "metric={prefix}_oa class=all value={oa}");
            for c in 0..m.classes() {
                if let Some(v) = m.iou(c) {
                    let _ = writeln!(s, "metric={prefix}_iou class={c} value={v}");
                }
            }
            let _ = writeln!(s, "metric={prefix}_miou class=all value={miou}");
        };
        section(&mut s, "change detection", "cd", &self.cd, cd_names);
        if let Some(ss) = &self.ss {
            section(&mut s, "semantic segmentation", "ss", ss, ss_names);
        }
        s
    }
}

/// One parsed `metric=... class=... value=...` line.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricLine {
    pub name: String,
    /// `None` for `class=all`.
    pub class: Option<usize>,
    pub value: f64,
}

/// Extracts the machine-readable lines of a metrics report.
pub fn parse_metric_lines(text: &str) -> Result<Vec<MetricLine>> {
    let mut out = Vec::new();
    for line in text.lines().filter(|l| l.starts_with("metric=")) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let get = |key: &str, i: usize| -> Result<&str> {
            fields
                .get(i)
                .and_then(|f| f.strip_prefix(key))
                .ok_or_else(|| Error::Parse { line: 0, message: format!("malformed metric line {line:?}") })
        };
        let name = get("metric=", 0)?.to_string();
        let class = match get("class=", 1)? {
            "all" => None,
            c => Some(c.parse().map_err(|_| Error::Parse { line: 0, message: format!("bad class in {line:?}") })?),
        };
        let value = get("value=", 2)?
            .parse()
            .map_err(|_| Error::Parse { line: 0, message: format!("bad value in {line:?}") })?;
        out.push(MetricLine { name, class, value });
    }
    Ok(out)
}

/// Per-point predictions for a whole scene.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenePrediction {
    pub ss_t0: Option<Vec<u8>>,
    pub ss_t1: Option<Vec<u8>>,
    pub cd_t1: Vec<u8>,
}

fn downsample_sample(sample: &BiTemporalSample, voxel: f64) -> Result<(BiTemporalSample, [Vec<usize>; 2])> {
    let (keep0, rep0) = voxel_downsample_map(&sample.t0, voxel)?;
    let (keep1, rep1) = voxel_downsample_map(&sample.t1, voxel)?;
    Ok((
        BiTemporalSample {
            t0: sample.t0.select(&keep0),
            t1: sample.t1.select(&keep1),
            frame_offset: sample.frame_offset,
        },
        [rep0, rep1],
    ))
}

/// Tile centers on a square grid whose nearest-center cells fit inside the cylinders.
fn tile_grid(lo: [f64; 3], hi: [f64; 3], radius: f64) -> (f64, [usize; 2]) {
    let spacing = radius * std::f64::consts::SQRT_2 * 0.95;
    let n = [0, 1].map(|a| (((hi[a] - lo[a]) / spacing).ceil() as usize) + 1);
    (spacing, n)
}

/// Predicts every point of a scene by tiling it with overlapping cylinders.
/// Each point takes the prediction of its nearest tile center, propagated
/// from its voxel representative.
pub fn predict_scene(model: &Model, scene: &BiTemporalSample, voxel: f64, radius: f64) -> Result<ScenePrediction> {
    let Some((lo, hi)) = scene.bounds() else {
        return Err(Error::EmptySample);
    };
    let (spacing, n) = tile_grid(lo, hi, radius);
    let tile_of = |p: &[f64; 3]| -> usize {
        let ix = (((p[0] - lo[0]) / spacing).round() as usize).min(n[0] - 1);
        let iy = (((p[1] - lo[1]) / spacing).round() as usize).min(n[1] - 1);
        ix * n[1] + iy
    };
    let mut tiles: Vec<[Vec<usize>; 2]> = vec![[Vec::new(), Vec::new()]; n[0] * n[1]];
    for e in 0..2u8 {
        for (i, p) in scene.epoch(e).coords.iter().enumerate() {
            tiles[tile_of(p)][e as usize].push(i);
        }
    }

    let with_ss = model.config.mt_enabled;
    let mut ss = [vec![IGNORED; scene.t0.len()], vec![IGNORED; scene.t1.len()]];
    let mut cd = vec![IGNORED; scene.t1.len()];
    for (t, owned) in tiles.iter().enumerate() {
        if owned[0].is_empty() && owned[1].is_empty() {
            continue;
        }
        let center = [lo[0] + (t / n[1]) as f64 * spacing, lo[1] + (t % n[1]) as f64 * spacing];
        let idx = [0u8, 1].map(|e| cylinder_indices(scene.epoch(e), center, radius));
        let crop = |e: u8| -> EpochPointSet {
            let ps = scene.epoch(e).select(&idx[e as usize]);
            ps.translated([-center[0], -center[1], 0.0])
        };
        let cyl = BiTemporalSample {
            t0: crop(0),
            t1: crop(1),
            frame_offset: scene.frame_offset,
        };
        let (down, reps) = downsample_sample(&cyl, voxel)?;
        let out = model.forward(&down)?;
        let ss_pred = out.ss_logits.as_ref().map(argmax_rows);
        let cd_pred = argmax_rows(&out.cd_logits);
        let n0 = down.t0.len();
        for e in 0..2usize {
            // Position of each owned point inside the cylinder selection.
            let pos: std::collections::HashMap<usize, usize> = idx[e].iter().enumerate().map(|(k, &i)| (i, k)).collect();
            for &i in &owned[e] {
                let k = *pos.get(&i).expect("owned points lie inside their tile's cylinder");
                let slot = reps[e][k];
                if let Some(sp) = &ss_pred {
                    ss[e][i] = sp[if e == 0 { slot } else { n0 + slot }];
                }
                if e == 1 {
                    cd[i] = cd_pred[slot];
                }
            }
        }
    }
    let [ss0, ss1] = ss;
    Ok(ScenePrediction {
        ss_t0: with_ss.then_some(ss0),
        ss_t1: with_ss.then_some(ss1),
        cd_t1: cd,
    })
}

fn require_labels(scene: &BiTemporalSample, semantic: bool) -> Result<()> {
    if scene.t1.change_labels.is_none() {
        return Err(Error::MissingLabels("change"));
    }
    if semantic && (scene.t0.semantic_labels.is_none() || scene.t1.semantic_labels.is_none()) {
        return Err(Error::MissingLabels("semantic"));
    }
    Ok(())
}

/// Confusion matrices over every labeled point of every scene.
pub fn evaluate(model: &Model, scenes: &[BiTemporalSample], voxel: f64, radius: f64) -> Result<EvalReport> {
    let with_ss = model.config.mt_enabled;
    let mut cd = ConfusionMatrix::new(CHANGE_CLASSES);
    let mut ss = ConfusionMatrix::new(SEMANTIC_CLASSES);
    for scene in scenes {
        require_labels(scene, with_ss)?;
        let pred = predict_scene(model, scene, voxel, radius)?;
        for (i, &p) in pred.cd_t1.iter().enumerate() {
            cd.add(scene.t1.change_label(i), p);
        }
        if let (Some(p0), Some(p1)) = (&pred.ss_t0, &pred.ss_t1) {
            for (e, preds) in [p0, p1].into_iter().enumerate() {
                let ps = scene.epoch(e as u8);
                for (i, &p) in preds.iter().enumerate() {
                    ss.add(ps.semantic_label(i), p);
                }
            }
        }
    }
    Ok(EvalReport {
        cd,
        ss: with_ss.then_some(ss),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_cd_miou: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Parameters from the epoch with the best validation change mIoU
    /// (the last epoch when there is no validation set).
    pub best: Model,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

fn has_supervision(sample: &BiTemporalSample, semantic: bool) -> bool {
    let cd = (0..sample.t1.len()).any(|i| sample.t1.change_label(i) != IGNORED);
    let ss = !semantic || merged_semantic_labels(sample).iter().any(|&l| l != IGNORED);
    cd && ss
}

/// Draws one training sample: a random scene, a cylinder at a random center
/// inside its extent, downsampled. Redraws samples without supervision.
pub fn draw_sample(
    scenes: &[BiTemporalSample],
    bounds: &[([f64; 3], [f64; 3])],
    cfg: &TrainConfig,
    semantic: bool,
    rng: &mut ChaCha8Rng,
) -> Result<BiTemporalSample> {
    for _ in 0..MAX_REDRAWS {
        let s = rng.gen_range(0..scenes.len());
        let (lo, hi) = bounds[s];
        let center = [rng.gen_range(lo[0]..=hi[0]), rng.gen_range(lo[1]..=hi[1])];
        let cyl = crate::pointset::cylinder_sample(&scenes[s], center, cfg.radius)?;
        let (down, _) = downsample_sample(&cyl, cfg.voxel)?;
        if has_supervision(&down, semantic) {
            return Ok(down);
        }
    }
    Err(Error::EmptySupervision)
}

/// Trains a fresh model. `on_epoch` sees each epoch's record as it completes.
pub fn fit(
    train: &[BiTemporalSample],
    val: &[BiTemporalSample],
    cfg: &RunConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<FitResult> {
    let mut cfg = cfg.clone();
    cfg.sync_grids();
    let (t, mcfg) = (&cfg.train, &cfg.model);
    t.validate()?;
    mcfg.validate()?;
    if t.samples_per_epoch == 0 || train.is_empty() {
        return Err(Error::EmptySupervision);
    }
    for scene in train.iter().chain(val) {
        require_labels(scene, mcfg.mt_enabled)?;
    }
    let bounds = train
        .iter()
        .map(|s| s.bounds().ok_or(Error::EmptySample))
        .collect::<Result<Vec<_>>>()?;

    let mut model = Model::new(mcfg.clone(), t.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(t.seed ^ 0x5eed_0f_d47a);
    let total_steps = t.epochs * t.samples_per_epoch;
    let mut history = Vec::with_capacity(t.epochs);
    let mut best: Option<(f64, usize, Model)> = None;
    for epoch in 1..=t.epochs {
        let mut loss_sum = 0.0;
        for i in 0..t.samples_per_epoch {
            let step = (epoch - 1) * t.samples_per_epoch + i;
            let sample = draw_sample(train, &bounds, t, mcfg.mt_enabled, &mut rng)?;
            let (out, state) = model.forward_with_state(&sample)?;
            let loss = total_loss(&out, &sample, t.alpha, t.beta)?;
            model.params.zero_grads();
            model.backward(&state, loss.dss.as_ref(), &loss.dcd)?;
            optimizer_step(&mut model.params, lr_at(step, total_steps, t.max_lr), t.weight_decay)?;
            loss_sum += loss.total;
        }
        let val_cd_miou = if val.is_empty() {
            None
        } else {
            evaluate(&model, val, t.voxel, t.radius)?.cd.mean_iou()
        };
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / t.samples_per_epoch as f64,
            val_cd_miou,
        };
        on_epoch(&record);
        history.push(record);
        let score = val_cd_miou.unwrap_or(f64::NEG_INFINITY);
        let improved = match &best {
            None => true,
            Some((b, _, _)) => val.is_empty() || score > *b,
        };
        if improved {
            best = Some((score, epoch, model.clone()));
        }
    }
    let (_, best_epoch, best) = best.expect("at least one epoch");
    Ok(FitResult {
        best,
        best_epoch,
        history,
    })
}
