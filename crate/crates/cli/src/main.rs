//! `xtcd`: generate synthetic scenes, train, evaluate, predict, inspect
//! serializations and export colored PLY files.

mod ply;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use xtcd::datagen::{generate_scene_pair, save_manifest, scene_seed, split_scene, SceneSpec};
use xtcd::kernels::gradcheck::{run_kernel_suite, KERNEL_TOLERANCE};
use xtcd::model::{load_checkpoint, miniature_grad_check, save_checkpoint, MODEL_TOLERANCE};
use xtcd::pointset::{load_pointset, load_sample, sample_paths, save_sample, EpochPointSet};
use xtcd::serialization::{build_order, Curve, SerializationConfig};
use xtcd::training::{evaluate, fit, predict_scene, RunConfig, TrainConfig};
use xtcd::{merge_epochs, BiTemporalSample, ChangeClass, SemanticClass};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(name = "xtcd", version, about = "Semantic change detection between two point-cloud epochs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scene pairs and their 6:1:2 train/val/test split.
    Generate(GenerateArgs),
    /// Train a model from a run config file.
    Train(TrainArgs),
    /// Score a checkpoint on labeled scenes.
    Eval(EvalArgs),
    /// Label a sample pair with a checkpoint.
    Predict(PredictArgs),
    /// Dump the serialization of a sample: `row code patch epoch` per point.
    Inspect(InspectArgs),
    /// Write a labeled point file as ASCII PLY colored by class.
    Export(ExportArgs),
    /// Run the kernel gradient suite and a miniature end-to-end check.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Number of scenes.
    #[arg(long, default_value_t = 1)]
    scenes: usize,
    #[arg(long)]
    extent: Option<f64>,
    #[arg(long)]
    density_t0: Option<f64>,
    #[arg(long)]
    density_t1: Option<f64>,
    #[arg(long)]
    p_new_building: Option<f64>,
    #[arg(long)]
    p_demolition: Option<f64>,
    #[arg(long)]
    p_new_clutter: Option<f64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Axis of the split strips (0 = x, 1 = y).
    #[arg(long, default_value_t = 0)]
    split_axis: usize,
}

#[derive(Args)]
struct TrainArgs {
    /// Run config: the 16 `key=value` lines.
    #[arg(long)]
    config: PathBuf,
    /// Directory of training scene pairs.
    #[arg(long)]
    train: PathBuf,
    /// Directory of validation scene pairs used to pick the best epoch.
    #[arg(long)]
    val: Option<PathBuf>,
    /// Checkpoint to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write the per-epoch history here.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct SamplingArgs {
    /// Cylinder radius for tiling; defaults to the desk profile.
    #[arg(long)]
    radius: Option<f64>,
}

impl SamplingArgs {
    fn radius(&self) -> anyhow::Result<f64> {
        let r = self.radius.unwrap_or(TrainConfig::desk().radius);
        if !(r > 0.0 && r.is_finite()) {
            return Err(usage(format!("radius must be positive, got {r}")));
        }
        Ok(r)
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Directory of scene pairs, or one sample basename.
    #[arg(long)]
    scenes: PathBuf,
    #[command(flatten)]
    sampling: SamplingArgs,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Sample basename; reads `<input>_t0.pts` and `<input>_t1.pts`.
    #[arg(long)]
    input: PathBuf,
    /// Output basename for the labeled pair.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    sampling: SamplingArgs,
}

#[derive(Args)]
struct InspectArgs {
    /// Sample basename.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = CurveArg::Z)]
    curve: CurveArg,
    #[arg(long, default_value_t = 1.0)]
    grid: f64,
    #[arg(long, default_value_t = 1024)]
    patch_capacity: usize,
    #[arg(long, default_value_t = 16)]
    bits: u32,
}

#[derive(Clone, Copy, ValueEnum)]
enum CurveArg {
    Z,
    ZTrans,
    Hilbert,
    HilbertTrans,
}

impl From<CurveArg> for Curve {
    fn from(c: CurveArg) -> Curve {
        match c {
            CurveArg::Z => Curve::ZOrder,
            CurveArg::ZTrans => Curve::ZOrderTrans,
            CurveArg::Hilbert => Curve::Hilbert,
            CurveArg::HilbertTrans => Curve::HilbertTrans,
        }
    }
}

#[derive(Args)]
struct ExportArgs {
    /// A single point file (`.pts`).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Which label column picks the colors.
    #[arg(long, value_enum, default_value_t = ply::LabelKind::Change)]
    labels: ply::LabelKind,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// A failure the user caused with flags rather than data.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: String) -> anyhow::Error {
    Usage(msg).into()
}

/// A failed numeric check; reported after the summary is printed.
#[derive(Debug)]
struct Numeric(String);

impl std::fmt::Display for Numeric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Numeric {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return EXIT_USAGE;
    }
    if err.downcast_ref::<Numeric>().is_some() {
        return EXIT_NUMERIC;
    }
    match err.downcast_ref::<xtcd::Error>() {
        Some(xtcd::Error::Config(_)) => EXIT_USAGE,
        Some(xtcd::Error::NonFiniteGradient(_)) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Predict(a) => predict(a),
        Command::Inspect(a) => inspect(a),
        Command::Export(a) => export(a),
        Command::Gradcheck(a) => gradcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn generate(a: GenerateArgs) -> anyhow::Result<()> {
    if a.scenes == 0 {
        return Err(usage("--scenes must be at least 1".into()));
    }
    if a.split_axis > 1 {
        return Err(usage(format!("--split-axis must be 0 or 1, got {}", a.split_axis)));
    }
    let mut base = SceneSpec::default();
    let overrides = [
        (&mut base.extent, a.extent),
        (&mut base.density_t0, a.density_t0),
        (&mut base.density_t1, a.density_t1),
        (&mut base.p_new_building, a.p_new_building),
        (&mut base.p_demolition, a.p_demolition),
        (&mut base.p_new_clutter, a.p_new_clutter),
        (&mut base.noise_sigma, a.noise_sigma),
    ];
    for (field, value) in overrides {
        if let Some(v) = value {
            *field = v;
        }
    }
    base.validate().map_err(|e| usage(e.to_string()))?;

    for dir in ["", "train", "val", "test"] {
        let d = a.out.join(dir);
        fs::create_dir_all(&d).with_context(|| format!("creating {}", d.display()))?;
    }
    let mut points = 0;
    for i in 0..a.scenes {
        let spec = SceneSpec {
            seed: scene_seed(a.seed, i as u64),
            ..base.clone()
        };
        let name = format!("scene_{i:03}");
        let scene = generate_scene_pair(&spec)?;
        save_sample(&scene, a.out.join(&name))?;
        save_manifest(&spec, a.out.join(format!("{name}.spec")))?;
        let parts = split_scene(&scene, a.split_axis)?;
        for (dir, part) in ["train", "val", "test"].iter().zip(&parts) {
            save_sample(part, a.out.join(dir).join(&name))?;
        }
        points += scene.len();
    }
    println!("generated {} scene(s), {points} points, in {}", a.scenes, a.out.display());
    Ok(())
}

/// Sample basenames in a directory (every `<name>_t0.pts` with a matching `_t1`),
/// or the path itself when it names a sample.
fn sample_bases(path: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if !path.is_dir() {
        let (t0, _) = sample_paths(path);
        if !t0.exists() {
            bail!(xtcd::Error::Io {
                path: t0,
                source: std::io::ErrorKind::NotFound.into(),
            });
        }
        return Ok(vec![path.to_path_buf()]);
    }
    let mut bases = Vec::new();
    for entry in fs::read_dir(path).with_context(|| format!("reading {}", path.display()))? {
        let p = entry?.path();
        let Some(name) = p.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(stem) = name.strip_suffix("_t0.pts") {
            let base = path.join(stem);
            if sample_paths(&base).1.exists() {
                bases.push(base);
            }
        }
    }
    bases.sort();
    if bases.is_empty() {
        bail!(xtcd::Error::InvalidArgument(format!("no sample pairs in {}", path.display())));
    }
    Ok(bases)
}

fn load_scenes(path: &Path) -> anyhow::Result<Vec<BiTemporalSample>> {
    sample_bases(path)?
        .iter()
        .map(|b| load_sample(b).map_err(anyhow::Error::from))
        .collect()
}

fn train(a: TrainArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::load(&a.config)?;
    let train = load_scenes(&a.train)?;
    let val = match &a.val {
        Some(v) => load_scenes(v)?,
        None => Vec::new(),
    };
    let mut history = String::new();
    let result = fit(&train, &val, &cfg, |r| {
        let val = r.val_cd_miou.map_or("n/a".to_string(), |v| v.to_string());
        let line = format!("epoch={} train_loss={} val_cd_miou={val}", r.epoch, r.train_loss);
        println!("{line}");
        let _ = writeln!(history, "{line}");
    })?;
    save_checkpoint(&result.best, &a.out)?;
    if let Some(h) = &a.history {
        fs::write(h, &history).with_context(|| format!("writing {}", h.display()))?;
    }
    println!("best epoch {} written to {}", result.best_epoch, a.out.display());
    Ok(())
}

fn class_names() -> (Vec<&'static str>, Vec<&'static str>) {
    (
        ChangeClass::ALL.iter().map(|c| c.name()).collect(),
        SemanticClass::ALL.iter().map(|c| c.name()).collect(),
    )
}

fn eval(a: EvalArgs) -> anyhow::Result<()> {
    let radius = a.sampling.radius()?;
    let model = load_checkpoint(&a.checkpoint)?;
    let scenes = load_scenes(&a.scenes)?;
    let report = evaluate(&model, &scenes, model.config.voxel, radius)?;
    let (cd, ss) = class_names();
    print!("{}", report.format(&cd, &ss));
    Ok(())
}

fn predict(a: PredictArgs) -> anyhow::Result<()> {
    let radius = a.sampling.radius()?;
    let model = load_checkpoint(&a.checkpoint)?;
    let sample = load_sample(&a.input)?;
    let pred = predict_scene(&model, &sample, model.config.voxel, radius)?;
    let ignored = |n: usize| vec![xtcd::IGNORED; n];
    let n0 = sample.t0.len();
    let n1 = sample.t1.len();
    let labeled = BiTemporalSample {
        t0: EpochPointSet::with_labels(sample.t0.coords.clone(), pred.ss_t0.unwrap_or_else(|| ignored(n0)), ignored(n0))?,
        t1: EpochPointSet::with_labels(sample.t1.coords.clone(), pred.ss_t1.unwrap_or_else(|| ignored(n1)), pred.cd_t1)?,
        frame_offset: sample.frame_offset,
    };
    save_sample(&labeled, &a.out)?;
    let (p0, p1) = sample_paths(&a.out);
    println!("wrote {} and {}", p0.display(), p1.display());
    Ok(())
}

fn inspect(a: InspectArgs) -> anyhow::Result<()> {
    let sample = load_sample(&a.input)?;
    let merged = merge_epochs(&sample, true);
    let cfg = SerializationConfig {
        curve: a.curve.into(),
        bits_per_axis: a.bits,
        grid_size: a.grid,
        patch_capacity: a.patch_capacity,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let order = build_order(&merged, &cfg, &vec![0; merged.len()])?;
    let patch_of = order.patch_of_position();
    let mut out = String::with_capacity(32 * merged.len());
    for (pos, &row) in order.permutation.iter().enumerate() {
        let _ = writeln!(out, "{row} {} {} {}", order.codes[pos], patch_of[pos], merged.epoch_of_row[row]);
    }
    print!("{out}");
    Ok(())
}

fn export(a: ExportArgs) -> anyhow::Result<()> {
    let ps = load_pointset(&a.input)?;
    let text = ply::to_ply(&ps, a.labels);
    fs::write(&a.out, text).with_context(|| format!("writing {}", a.out.display()))?;
    println!("wrote {} points to {}", ps.len(), a.out.display());
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> anyhow::Result<()> {
    if a.trials == 0 {
        return Err(usage("--trials must be at least 1".into()));
    }
    let mut failed = Vec::new();
    for r in run_kernel_suite(a.trials, a.seed) {
        let ok = r.passed(KERNEL_TOLERANCE);
        println!(
            "{:<26} trials={} max_rel_error={:.3e} {}",
            r.kernel,
            r.trials,
            r.max_rel_error,
            if ok { "ok" } else { "FAIL" }
        );
        if !ok {
            failed.push(r.kernel);
        }
    }
    let err = miniature_grad_check(a.seed)?;
    let ok = err <= MODEL_TOLERANCE;
    println!("{:<26} trials=1 max_rel_error={err:.3e} {}", "model", if ok { "ok" } else { "FAIL" });
    if !ok {
        failed.push("model");
    }
    if failed.is_empty() {
        println!("all gradient checks passed");
        Ok(())
    } else {
        Err(Numeric(format!("gradient check failed for {}", failed.join(", "))).into())
    }
}
