use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use super::{DetectArgs, EvalArgs, ExtractArgs, OverlayArgs, Resolver, SelectArgs, SurfaceArgs, SynthArgs, TrainArgs, TrainingArgs};
use crate::eval::{confusion, eer, metrics, roc, vertical_average, write_report, write_roc, RocCurve, TrialResult};
use crate::modelsel::{self, Candidate, CvSettings, RegContext};
use crate::nn::{checkpoint, classify, tumor_scores, ArchitectureSpec, LabeledBatch, LrSchedule, PoolKind, Shape, TrainConfig};
use crate::overlay::{self, accumulate, predictions_for_slice, render, score_image, write_scores};
use crate::preproc::patches::{ExtractMode, LabelSource, PatchSet, PATCH};
use crate::preproc::surface::{detect_surface, SurfaceDetection, SurfaceParams};
use crate::preproc::volume::BScanVolume;
use crate::regularizers::{Method, SamplerSettings};
use crate::synth::{generate, PhantomConfig, SurfaceProfile};
use crate::{Error, Result, TissueClass};

const STANDARD_EPOCHS: usize = 45;
const WORKERS_ENV: &str = "OCTMARGIN_WORKERS";

fn parse_list<T: FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| Error::Config(format!("invalid {what} `{}`", s.trim()))))
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn surface_params(r: &mut Resolver, a: &SurfaceArgs) -> Result<SurfaceParams> {
    let d = SurfaceParams::default();
    let p = SurfaceParams {
        ball_radius: r.or(a.ball_radius, "ball-radius", d.ball_radius)?,
        shift: r.or(a.shift, "shift", d.shift)?,
        min_edge_magnitude: r.or(a.edge_floor, "edge-floor", d.min_edge_magnitude)?,
        ..d
    };
    p.validate()?;
    Ok(p)
}

fn detect_all(volume: &BScanVolume, params: &SurfaceParams) -> Result<Vec<SurfaceDetection>> {
    (0..volume.frames).into_par_iter().map(|f| detect_surface(&volume.frame(f), params)).collect()
}

pub(super) fn synth(r: &mut Resolver, a: SynthArgs) -> Result<()> {
    let d = PhantomConfig::default();
    let out = PathBuf::from(r.req(a.out, "out")?);
    let seed = r.req(a.seed, "seed")?;
    let rows = r.or(a.rows, "rows", d.rows)?;
    let kind = r.or(a.surface, "surface", "flat".to_string())?;
    let row = r.or(a.surface_row, "surface-row", 60.0)?;
    let surface = match kind.as_str() {
        "flat" => SurfaceProfile::Flat { row },
        "tilted" => SurfaceProfile::Tilted { row, slope: r.or(a.slope, "slope", 0.05)? },
        "sinusoidal" => SurfaceProfile::Sinusoidal {
            row,
            amplitude: r.or(a.amplitude, "amplitude", 10.0)?,
            period: r.or(a.surface_period, "surface-period", 400.0)?,
        },
        other => return Err(Error::Config(format!("unknown surface profile `{other}`"))),
    };
    let layout_text = r.or(a.layout, "layout", "normal,tumor".to_string())?;
    let config = PhantomConfig {
        rows,
        cols: r.or(a.cols, "cols", d.cols)?,
        frames: r.or(a.frames, "frames", d.frames)?,
        surface,
        layout: parse_list::<TissueClass>(&layout_text, "tissue class")?,
        adipose_period: r.or(a.texture_period, "texture-period", d.adipose_period)?,
        noise: r.or(a.noise, "noise", d.noise)?,
        seed,
        ..d
    };
    r.echo("synth");
    let volume = generate(&config)?;
    volume.save(&out)?;
    println!("wrote {}×{}×{} phantom to {}", volume.rows, volume.cols, volume.frames, out.display());
    Ok(())
}

pub(super) fn detect(r: &mut Resolver, a: DetectArgs) -> Result<()> {
    let volume_path = PathBuf::from(r.req(a.volume, "volume")?);
    let out = PathBuf::from(r.req(a.out, "out")?);
    let params = surface_params(r, &a.surface)?;
    r.echo("detect");
    let volume = BScanVolume::load(&volume_path)?;
    let detections = detect_all(&volume, &params)?;
    let mut text = String::from("frame,col,row,provenance\n");
    for (f, d) in detections.iter().enumerate() {
        for (c, (row, p)) in d.curve.values.iter().zip(&d.curve.provenance).enumerate() {
            let _ = writeln!(text, "{f},{c},{row},{}", p.name());
        }
    }
    write_text(&out, &text)?;
    println!("wrote surfaces for {} frames of width {} to {}", volume.frames, volume.cols, out.display());
    Ok(())
}

pub(super) fn extract(r: &mut Resolver, a: ExtractArgs) -> Result<()> {
    let volume_path = PathBuf::from(r.req(a.volume, "volume")?);
    let out = PathBuf::from(r.req(a.out, "out")?);
    let mode: ExtractMode = r.or(a.mode, "mode", "train".to_string())?.parse()?;
    let label = r.opt(a.label, "label")?;
    let params = surface_params(r, &a.surface)?;
    let volume = BScanVolume::load(&volume_path)?;
    let source = match label.as_deref() {
        None if volume.mask().is_some() => LabelSource::Mask,
        None | Some("none") => LabelSource::Unlabeled,
        Some("mask") => LabelSource::Mask,
        Some(other) => LabelSource::Volume(other.parse()?),
    };
    r.note("label-source", format!("{source:?}"));
    r.echo("extract");
    let surfaces: Vec<_> = detect_all(&volume, &params)?.into_iter().map(|d| d.curve).collect();
    let set = crate::preproc::extract_patches(&volume, &surfaces, mode, source)?;
    set.save(&out)?;
    let tumor = set.patches.iter().filter(|p| p.label == Some(TissueClass::Tumor)).count();
    let normal = set.patches.iter().filter(|p| p.label == Some(TissueClass::Normal)).count();
    println!("wrote {} patches ({tumor} tumor, {normal} normal) to {}", set.len(), out.display());
    Ok(())
}

fn labeled_batch(set: &PatchSet) -> Result<LabeledBatch<'_>> {
    let (inputs, labels): (Vec<&[f64]>, Vec<TissueClass>) = set.labeled().map(|(p, l)| (p.data.as_slice(), l)).unzip();
    if inputs.is_empty() {
        return Err(Error::Empty("patch set has no labeled patches".into()));
    }
    LabeledBatch::new(inputs, labels)
}

struct Training {
    method: Method,
    arch: ArchitectureSpec,
    config: TrainConfig,
    ctx: RegContext,
}

fn training_setup(r: &mut Resolver, a: &TrainingArgs, n_train: usize) -> Result<Training> {
    let method: Method = r.req(a.method.clone(), "method")?.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
    let seed = r.req(a.seed, "seed")?;
    let epochs = r.or(a.epochs, "epochs", STANDARD_EPOCHS)?;
    let lr_scale = r.or(a.lr_scale, "lr-scale", 1.0)?;
    let mut schedule = if epochs == STANDARD_EPOCHS { LrSchedule::standard() } else { LrSchedule::compressed(epochs) };
    if lr_scale != 1.0 {
        schedule = schedule.scaled(lr_scale);
    }
    if epochs != STANDARD_EPOCHS {
        eprintln!("warning: desk-scale training with {epochs} epochs instead of {STANDARD_EPOCHS}; learning-rate phases compressed to {:?}", schedule.phases);
    }
    let config = TrainConfig {
        schedule,
        momentum: r.or(a.momentum, "momentum", method.default_momentum())?,
        batch_size: r.or(a.batch_size, "batch-size", 100)?,
        seed,
    };
    config.validate()?;
    let filters: Vec<usize> = parse_list(&r.or(a.filters.clone(), "filters", "16,32,64".to_string())?, "filter count")?;
    let filters: [usize; 3] =
        filters.try_into().map_err(|_| Error::Config("--filters needs exactly three widths".into()))?;
    let hidden = r.or(a.hidden, "hidden", 128)?;
    let arch = ArchitectureSpec::with_widths(Shape::new(3, PATCH, PATCH), filters, hidden, PoolKind::Max);
    arch.validate()?;

    let mut ctx = RegContext::default();
    match method {
        Method::FunctionNormData => {
            let path = r.opt(a.fn_set.clone(), "fn-set")?.ok_or_else(|| Error::Config("FN-DD needs --fn-set".into()))?;
            let set = PatchSet::load(Path::new(&path))?;
            if set.is_empty() {
                return Err(Error::Empty(format!("regularization set {path} is empty")));
            }
            ctx.fn_set = Some(Arc::new(set.patches.into_iter().map(|p| p.data).collect()));
        }
        Method::FunctionNormSampled => {
            let d = SamplerSettings::default();
            ctx.fn_samples = r.or(a.fn_samples, "fn-samples", n_train)?;
            ctx.sampler = SamplerSettings {
                burn_in_sweeps: r.or(a.sampler_burn_in, "sampler-burn-in", d.burn_in_sweeps)?,
                thinning_sweeps: r.or(a.sampler_thin, "sampler-thin", d.thinning_sweeps)?,
                coordinates_per_sweep: r.opt(a.sampler_coords, "sampler-coords")?,
                chains: r.or(a.sampler_chains, "sampler-chains", d.chains)?,
                ..d
            };
            ctx.sampler.validate()?;
        }
        _ => {}
    }
    Ok(Training { method, arch, config, ctx })
}

pub(super) fn train(r: &mut Resolver, a: TrainArgs) -> Result<()> {
    let patches_path = PathBuf::from(r.req(a.patches, "patches")?);
    let out = PathBuf::from(r.req(a.out, "out")?);
    let lambda = r.req(a.lambda, "lambda")?;
    let dropout = r.opt(a.dropout, "dropout")?;
    let pooling: PoolKind = r.or(a.pooling, "pooling", "max".to_string())?.parse()?;
    let set = PatchSet::load(&patches_path)?;
    let data = labeled_batch(&set)?;
    let mut t = training_setup(r, &a.training, data.len())?;
    if dropout.is_some() && t.method != Method::WeightDecayDropout {
        return Err(Error::Config(format!("--dropout does not apply to {}", t.method)));
    }
    let candidate = Candidate::new(t.method, lambda, dropout, pooling);
    let reg = candidate.regularizer(&t.ctx)?;
    t.arch.set_pooling(pooling);
    r.note("training-patches", data.len());
    r.echo("train");
    let outcome = crate::nn::train(&t.arch, &data, &t.config, &reg)?;
    checkpoint::save(&outcome.params, &out)?;
    if let Some(last) = outcome.log.last() {
        println!(
            "{}: {} epochs, final loss {:.5}, penalty {:.5}, training error {:.4}; wrote {}",
            candidate.label(),
            last.epoch,
            last.loss,
            last.penalty,
            last.train_error,
            out.display()
        );
    }
    Ok(())
}

fn worker_count(r: &mut Resolver, flag: Option<usize>) -> Result<usize> {
    let env = match std::env::var(WORKERS_ENV) {
        Ok(v) => Some(v.parse::<usize>().map_err(|_| Error::Config(format!("invalid {WORKERS_ENV} `{v}`")))?),
        Err(_) => None,
    };
    let default = std::thread::available_parallelism().map_or(1, |n| n.get());
    let n = r.or(flag.or(env), "workers", default)?;
    if n == 0 {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    Ok(n)
}

pub(super) fn select(r: &mut Resolver, a: SelectArgs) -> Result<()> {
    let patches_path = PathBuf::from(r.req(a.patches, "patches")?);
    let out = PathBuf::from(r.req(a.out, "out")?);
    let set = PatchSet::load(&patches_path)?;
    let data = labeled_batch(&set)?;
    let folds = r.or(a.folds, "folds", modelsel::DEFAULT_FOLDS)?;
    let workers = worker_count(r, a.workers)?;
    // Each fold trains on (k−1)/k of the data; FN-SS sample count follows.
    let n_train = data.len() - data.len() / folds.max(1);
    let t = training_setup(r, &a.training, n_train)?;
    let mut grid = modelsel::enumerate_grid(t.method);
    if let Some(text) = r.opt(a.lambdas, "lambdas")? {
        let keep: Vec<f64> = parse_list(&text, "lambda")?;
        grid.retain(|c| keep.iter().any(|&l| (l - c.lambda).abs() <= 1e-12 * l.abs().max(1e-300)));
    }
    if let Some(text) = r.opt(a.poolings, "poolings")? {
        let keep: Vec<PoolKind> = parse_list(&text, "pooling")?;
        grid.retain(|c| keep.contains(&c.pooling));
    }
    if grid.is_empty() {
        return Err(Error::Config("the restricted grid is empty".into()));
    }
    r.note("candidates", grid.len());
    r.echo("select");
    eprintln!("note: one fold split (seed {}) is shared by every candidate", t.config.seed);
    let split = modelsel::kfold_split(data.len(), folds, t.config.seed)?;
    let settings = CvSettings { arch: t.arch, train: t.config, reg: t.ctx };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    let result = pool.install(|| modelsel::cross_validate(&data, &grid, &split, &settings))?;
    write_text(&out, &modelsel::write_table(&result))?;
    println!(
        "selected {} (mean AUC {:.4}); table written to {}",
        result.best().label(),
        result.means[result.winner].unwrap_or(f64::NAN),
        out.display()
    );
    Ok(())
}

struct RosterEntry {
    name: String,
    model: PathBuf,
    patches: PathBuf,
}

fn read_roster(path: &Path) -> Result<Vec<RosterEntry>> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = line.split_whitespace().collect();
        if cells.len() != 3 {
            return Err(Error::Config(format!("roster line {}: expected `name model test_patches`", n + 1)));
        }
        out.push(RosterEntry { name: cells[0].to_string(), model: base.join(cells[1]), patches: base.join(cells[2]) });
    }
    if out.is_empty() {
        return Err(Error::Empty("roster lists no trials".into()));
    }
    Ok(out)
}

pub(super) fn eval(r: &mut Resolver, a: EvalArgs) -> Result<()> {
    let roster_path = PathBuf::from(r.req(a.roster, "roster")?);
    let out = PathBuf::from(r.req(a.out, "out")?);
    let roc_out = r.opt(a.roc, "roc")?.map(PathBuf::from);
    let roster = read_roster(&roster_path)?;
    r.note("trials", roster.len());
    r.echo("eval");
    let mut trials = Vec::with_capacity(roster.len());
    let mut curves: Vec<RocCurve> = Vec::with_capacity(roster.len());
    for entry in &roster {
        let params = checkpoint::load(&entry.model)?;
        let set = PatchSet::load(&entry.patches)?;
        let data = labeled_batch(&set)?;
        let predicted = classify(&params, &data.inputs)?;
        let scores = tumor_scores(&params, &data.inputs)?;
        let counts = confusion(&predicted, &data.labels)?;
        let curve = roc(&scores, &data.labels)?;
        trials.push(TrialResult { name: entry.name.clone(), metrics: metrics(&counts)?, auc: curve.auc, eer: eer(&curve) });
        curves.push(curve);
    }
    let report = write_report(&trials);
    write_text(&out, &report)?;
    print!("{report}");
    if let Some(path) = roc_out {
        let avg = vertical_average(&curves, &crate::eval::roc::default_grid())?;
        write_text(&path, &write_roc(&avg))?;
    }
    Ok(())
}

pub(super) fn overlay(r: &mut Resolver, a: OverlayArgs) -> Result<()> {
    let model_path = PathBuf::from(r.req(a.model, "model")?);
    let volume_path = PathBuf::from(r.req(a.volume, "volume")?);
    let out_dir = PathBuf::from(r.req(a.out_dir, "out-dir")?);
    let slices_text = r.or(a.slices, "slices", "all".to_string())?;
    let min_pixels = r.or(a.min_pixels, "min-pixels", overlay::DEFAULT_MIN_PIXELS)?;
    let params = surface_params(r, &a.surface)?;
    r.note("field", a.field);
    let model = checkpoint::load(&model_path)?;
    let volume = BScanVolume::load(&volume_path)?;
    let slices: Vec<usize> = if slices_text == "all" {
        (0..volume.frames).collect()
    } else {
        parse_list(&slices_text, "slice index")?
    };
    if let Some(s) = slices.iter().find(|&&s| s >= volume.frames) {
        return Err(Error::InvalidArgument(format!("slice {s} outside a volume of {} frames", volume.frames)));
    }
    r.echo("overlay");
    std::fs::create_dir_all(&out_dir)?;

    let start = Instant::now();
    let detections = detect_all(&volume, &params)?;
    let surfaces: Vec<_> = detections.iter().map(|d| d.curve.clone()).collect();
    let set = crate::preproc::extract_patches(&volume, &surfaces, ExtractMode::Test, LabelSource::Unlabeled)?;
    let inputs: Vec<&[f64]> = set.patches.iter().map(|p| p.data.as_slice()).collect();
    let classes = classify(&model, &inputs)?;
    let origins: Vec<_> = set.patches.iter().map(|p| p.origin).collect();
    let shared = start.elapsed().as_secs_f64();

    let mut timing = String::from("slice,patches,seconds\n");
    for &s in &slices {
        let t0 = Instant::now();
        let preds = predictions_for_slice(&origins, &classes, s);
        let field = accumulate(volume.rows, volume.cols, &preds, &surfaces[s].values, overlay::MAX_DEPTH)?;
        render(&field).save_png(&out_dir.join(format!("slice_{s:03}.png")))?;
        if let Some(mask) = volume.mask_frame(s) {
            let scores = score_image(&field, mask, min_pixels)?;
            write_text(&out_dir.join(format!("slice_{s:03}_scores.csv")), &write_scores(&scores))?;
        }
        if a.field {
            field.to_volume()?.save(&out_dir.join(format!("slice_{s:03}_field.octv")))?;
        }
        // Surface detection and patch classification are shared by all
        // slices; each slice is charged an equal share.
        let secs = t0.elapsed().as_secs_f64() + shared / slices.len() as f64;
        log::info!("slice {s}: {} patches, {secs:.3} s", preds.len());
        let _ = writeln!(timing, "{s},{},{secs:.3}", preds.len());
    }
    write_text(&out_dir.join("timing.csv"), &timing)?;
    println!("wrote {} overlays to {} ({} patches classified)", slices.len(), out_dir.display(), set.len());
    Ok(())
}
