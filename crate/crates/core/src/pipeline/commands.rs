//! The operations behind each `elsr` verb.
//!
//! Every command takes a log sink and returns a report; printing policy and
//! exit codes belong to the binary.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::autograd::{run_stage_with, InitFrom, PatchSampler, StageOutcome, StagePlan, TrainStageConfig};
use crate::error::{invalid, Error, Result};
use crate::imaging::eval::{eval_bicubic, eval_sequence, list_frames, score_dirs};
use crate::imaging::{bicubic_downscale, bicubic_upscale, encode_png, read_png, super_resolve, write_png, EvalReport};
use crate::model::archive::write_atomic;
use crate::model::{
    adapt_weights_x2_to_x4, config_from_archive, ElsrModel, LayerInfo, ModelConfig, WeightArchive,
};
use crate::pipeline::layout::{DatasetLayout, Split};
use crate::tensor::{nearest_upsample, Tensor};

/// Datasets with more frames than this are decoded from disk on every draw
/// instead of being held in memory.
const IN_MEMORY_FRAMES: usize = 512;

macro_rules! say {
    ($log:expr, $($arg:tt)*) => {
        let _ = writeln!($log, $($arg)*);
    };
}

fn io_context(path: &Path, e: Error) -> Error {
    match e {
        Error::Io(io) => Error::Dataset(format!("{}: {io}", path.display())),
        other => other,
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PrepareReport {
    pub written: usize,
    pub skipped: usize,
    pub failed: Vec<(String, String)>,
}

impl PrepareReport {
    pub fn ok(&self) -> bool {
        self.failed.is_empty()
    }
}

enum FrameResult {
    Written,
    Skipped,
}

fn prepare_frame(src: &Path, dst: &Path, scale: usize) -> Result<FrameResult> {
    let bytes = if scale == 1 {
        std::fs::read(src)?
    } else {
        let hr = read_png(src)?;
        let lr = bicubic_downscale(&hr, scale)?;
        encode_png(&lr).map_err(|e| Error::Png {
            path: dst.to_path_buf(),
            msg: e.to_string(),
        })?
    };
    if std::fs::read(dst).is_ok_and(|existing| existing == bytes) {
        return Ok(FrameResult::Skipped);
    }
    write_atomic(dst, &bytes)?;
    Ok(FrameResult::Written)
}

/// Bicubic-downscales every PNG under `hr_root` into the same relative path
/// under `out_root`. Frames whose encoded output already exists byte for
/// byte are left alone; scale 1 copies files verbatim. Per-frame failures
/// are collected, not fatal.
pub fn cmd_prepare_data(hr_root: &Path, out_root: &Path, scale: usize, log: &mut dyn Write) -> Result<PrepareReport> {
    if scale == 0 {
        return Err(invalid("prepare-data", "scale must be positive"));
    }
    let frames = list_frames(hr_root)?;
    let results: Vec<(String, Result<FrameResult>)> = frames
        .par_iter()
        .map(|name| {
            let src = hr_root.join(name);
            let r = prepare_frame(&src, &out_root.join(name), scale).map_err(|e| io_context(&src, e));
            (name.clone(), r)
        })
        .collect();
    let mut report = PrepareReport::default();
    for (name, r) in results {
        match r {
            Ok(FrameResult::Written) => report.written += 1,
            Ok(FrameResult::Skipped) => report.skipped += 1,
            Err(e) => {
                say!(log, "error: {name}: {e}");
                report.failed.push((name, e.to_string()));
            }
        }
    }
    say!(
        log,
        "prepare-data x{scale}: {} written, {} unchanged, {} failed -> {}",
        report.written,
        report.skipped,
        report.failed.len(),
        out_root.display()
    );
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct TrainOptions {
    /// Stage file with `[stage.N]` sections.
    pub config: PathBuf,
    /// Dataset root in the REDS layout; the `train` split is used.
    pub data_root: PathBuf,
    pub out: PathBuf,
    pub stage: u32,
    pub seed: u64,
    pub iters_override: Option<usize>,
    pub batch_size: Option<usize>,
    pub patch_size_hr: Option<usize>,
    /// Source weights for stages that do not start from scratch. Defaults
    /// to `stage{N-1}.elsr` next to `out`.
    pub init: Option<PathBuf>,
    /// Width of a scratch model.
    pub nf: usize,
    pub log_every: usize,
}

impl TrainOptions {
    pub fn new(config: impl Into<PathBuf>, data_root: impl Into<PathBuf>, out: impl Into<PathBuf>, stage: u32) -> Self {
        Self {
            config: config.into(),
            data_root: data_root.into(),
            out: out.into(),
            stage,
            seed: 0,
            iters_override: None,
            batch_size: None,
            patch_size_hr: None,
            init: None,
            nf: 6,
            log_every: 100,
        }
    }

    pub fn default_init_path(&self) -> PathBuf {
        let dir = self.out.parent().unwrap_or(Path::new(""));
        dir.join(format!("stage{}.elsr", self.stage.saturating_sub(1)))
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    /// The stage as actually run, after overrides.
    pub stage: TrainStageConfig,
    pub outcome: StageOutcome,
    pub weights: PathBuf,
    pub loss_csv: PathBuf,
}

/// `<out>.loss.csv` with the archive extension dropped.
pub fn loss_csv_path(out: &Path) -> PathBuf {
    out.with_extension("loss.csv")
}

/// `lr` after each milestone, e.g. `5e-4 @0, 2.5e-4 @200000`.
pub fn describe_lr_schedule(stage: &TrainStageConfig) -> Result<String> {
    let mut points = vec![0];
    points.extend(stage.lr_milestones.iter().copied());
    let parts = points
        .into_iter()
        .map(|i| Ok(format!("{:e} @{i}", stage.lr_at(i)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.join(", "))
}

fn initial_model(stage: &TrainStageConfig, opts: &TrainOptions, log: &mut dyn Write) -> Result<ElsrModel> {
    if stage.init_from == InitFrom::Scratch {
        say!(log, "init: scratch, seed {}", opts.seed);
        return ElsrModel::new(ModelConfig::new(stage.scale, opts.nf), opts.seed);
    }
    let path = opts.init.clone().unwrap_or_else(|| opts.default_init_path());
    if !path.is_file() {
        return Err(Error::Dataset(format!(
            "stage {} starts from {} weights; expected file {} is missing",
            stage.id,
            stage.init_from,
            path.display()
        )));
    }
    let mut archive = WeightArchive::load(&path)?;
    if stage.init_from == InitFrom::X2Adapted && archive.scale == 2 {
        let target = ModelConfig {
            scale: stage.scale,
            ..config_from_archive(&archive)?
        };
        archive = adapt_weights_x2_to_x4(&archive, &target)?;
        say!(log, "init: {} adapted x2 -> x{}", path.display(), stage.scale);
    } else {
        say!(log, "init: {}", path.display());
    }
    let config = config_from_archive(&archive)?;
    if config.scale != stage.scale {
        return Err(invalid(
            "train",
            format!("{} holds x{} weights, stage {} trains x{}", path.display(), config.scale, stage.id, stage.scale),
        ));
    }
    ElsrModel::from_archive(&archive, config)
}

/// Runs one stage of the stage file and writes the weight archive and the
/// loss trace next to it.
pub fn cmd_train(opts: &TrainOptions, log: &mut dyn Write) -> Result<TrainReport> {
    let plan = StagePlan::load(&opts.config).map_err(|e| io_context(&opts.config, e))?;
    let mut stage = plan
        .stage(opts.stage)
        .ok_or_else(|| invalid("train", format!("stage {} not in {}", opts.stage, opts.config.display())))?
        .clone();
    say!(log, "{stage}");
    say!(log, "lr schedule: {}", describe_lr_schedule(&stage)?);
    if let Some(k) = opts.iters_override {
        stage = stage.with_iters_override(k)?;
        say!(log, "iters override {k}: milestones {:?}", stage.lr_milestones);
    }
    if let Some(b) = opts.batch_size {
        stage.batch_size = b;
    }
    if let Some(p) = opts.patch_size_hr {
        stage.patch_size_hr = p;
    }
    stage.validate()?;
    if opts.batch_size.is_some() || opts.patch_size_hr.is_some() {
        say!(log, "running as: {stage}");
    }

    let layout = DatasetLayout::new(&opts.data_root, Split::Train);
    let pairs = layout.frame_pairs(stage.scale)?;
    let frames = pairs.len();
    let data = if frames <= IN_MEMORY_FRAMES {
        PatchSampler::load(pairs, stage.scale)?
    } else {
        PatchSampler::from_paths(pairs, stage.scale)?
    };
    say!(log, "data: {frames} frames from {}", layout.hr_dir().display());

    let mut model = initial_model(&stage, opts, log)?;
    // Batch sampling gets its own stream so it does not track the init draws.
    let sample_seed = opts.seed ^ 0x9E37_79B9_7F4A_7C15;
    let outcome = run_stage_with(&mut model, &stage, &data, sample_seed, opts.log_every, |p| {
        say!(log, "iter {:>8}  lr {:e}  loss {:.6}", p.iter, p.lr, p.loss);
    })?;

    model.save(&opts.out)?;
    let loss_csv = loss_csv_path(&opts.out);
    outcome.write_trace_csv(&loss_csv)?;
    say!(log, "wrote {} and {}", opts.out.display(), loss_csv.display());
    Ok(TrainReport {
        stage,
        outcome,
        weights: opts.out.clone(),
        loss_csv,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptReport {
    /// Max absolute difference between the adapted ×4 output and the
    /// nearest-upsampled ×2 output on the probe input.
    pub residual: f32,
}

/// Adapts a ×2 archive to ×4 and checks the nearest-upsampling identity on
/// a random probe before writing.
pub fn cmd_adapt(x2_weights: &Path, out: &Path, seed: u64, log: &mut dyn Write) -> Result<AdaptReport> {
    let x2 = WeightArchive::load(x2_weights)?;
    let x2_config = config_from_archive(&x2)?;
    if x2_config.scale != 2 {
        return Err(invalid(
            "adapt",
            format!("{} holds x{} weights, expected x2", x2_weights.display(), x2_config.scale),
        ));
    }
    let x4_config = ModelConfig {
        scale: 4,
        ..x2_config.clone()
    };
    let x4 = adapt_weights_x2_to_x4(&x2, &x4_config)?;
    let small = ElsrModel::from_archive(&x2, x2_config)?;
    let big = ElsrModel::from_archive(&x4, x4_config)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probe = Tensor::from_fn([1, 3, 16, 16], |_, _, _, _| rng.gen_range(0.0..1.0));
    let expected = nearest_upsample(&small.forward(&probe)?, 2);
    let residual = big.forward(&probe)?.max_abs_diff(&expected);
    say!(log, "verification: max |x4 - nearest(x2)| = {residual:.3e} on a 16x16 probe");

    x4.save(out)?;
    say!(log, "wrote {}", out.display());
    Ok(AdaptReport { residual })
}

#[derive(Clone, Debug)]
pub struct InferOptions {
    pub weights: PathBuf,
    /// A PNG file or a directory searched recursively.
    pub input: PathBuf,
    pub out_dir: PathBuf,
    /// Also write `<stem>_bicubic.png` next to each output.
    pub baseline: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InferReport {
    pub written: Vec<PathBuf>,
    pub failed: Vec<(PathBuf, String)>,
}

pub fn load_model(weights: &Path) -> Result<ElsrModel> {
    let archive = WeightArchive::load(weights)?;
    let config = config_from_archive(&archive)?;
    ElsrModel::from_archive(&archive, config)
}

fn baseline_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    out.with_file_name(format!("{stem}_bicubic.png"))
}

/// Super-resolves one file or every PNG under a directory. Unreadable
/// inputs are reported and skipped.
pub fn cmd_infer(opts: &InferOptions, log: &mut dyn Write) -> Result<InferReport> {
    let model = load_model(&opts.weights)?;
    let jobs: Vec<(PathBuf, PathBuf)> = if opts.input.is_dir() {
        list_frames(&opts.input)?
            .into_iter()
            .map(|name| (opts.input.join(&name), opts.out_dir.join(&name)))
            .collect()
    } else {
        let name = opts
            .input
            .file_name()
            .ok_or_else(|| invalid("infer", format!("{} is not a file", opts.input.display())))?;
        vec![(opts.input.clone(), opts.out_dir.join(name))]
    };
    if jobs.is_empty() {
        say!(log, "warning: no PNG files under {}", opts.input.display());
        return Ok(InferReport::default());
    }
    let scale = model.scale();
    let mut report = InferReport::default();
    for (src, dst) in jobs {
        let result = (|| -> Result<()> {
            let lr = read_png(&src).map_err(|e| io_context(&src, e))?;
            write_png(&super_resolve(&model, &lr)?, &dst)?;
            if opts.baseline {
                write_png(&bicubic_upscale(&lr, scale)?, &baseline_path(&dst))?;
            }
            Ok(())
        })();
        match result {
            Ok(()) => {
                say!(log, "{} -> {}", src.display(), dst.display());
                report.written.push(dst);
            }
            Err(e) => {
                say!(log, "error: {}: {e}", src.display());
                report.failed.push((src, e.to_string()));
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug)]
pub enum EvalSource {
    /// Run the network on LR frames.
    Model { weights: PathBuf, lr_dir: PathBuf },
    /// Frames already on disk, e.g. from `infer`.
    Predictions(PathBuf),
    /// Bicubic upsampling of LR frames.
    Bicubic { lr_dir: PathBuf, scale: usize },
}

/// Scores a frame source against the HR tree and optionally writes the CSV.
pub fn cmd_eval(source: &EvalSource, hr_dir: &Path, report_csv: Option<&Path>, log: &mut dyn Write) -> Result<EvalReport> {
    let report = match source {
        EvalSource::Model { weights, lr_dir } => eval_sequence(&load_model(weights)?, lr_dir, hr_dir)?,
        EvalSource::Predictions(dir) => score_dirs(dir, hr_dir)?,
        EvalSource::Bicubic { lr_dir, scale } => eval_bicubic(lr_dir, hr_dir, *scale)?,
    };
    let csv = report.to_csv();
    if let Some(path) = report_csv {
        write_atomic(path, csv.as_bytes())?;
        say!(log, "wrote {}", path.display());
    }
    let _ = log.write_all(csv.as_bytes());
    Ok(report)
}

#[derive(Clone, Debug)]
pub enum InfoSource {
    Weights(PathBuf),
    Config(ModelConfig),
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfoReport {
    pub config: ModelConfig,
    pub layers: Vec<LayerInfo>,
    pub params: usize,
    pub flops: u64,
    pub lr_size: (usize, usize),
}

/// Per-layer shapes, parameter count and FLOPs for an `lr_h x lr_w` input.
pub fn cmd_info(source: &InfoSource, lr_h: usize, lr_w: usize, log: &mut dyn Write) -> Result<InfoReport> {
    let model = match source {
        InfoSource::Weights(path) => load_model(path)?,
        InfoSource::Config(cfg) => ElsrModel::zeros(cfg.clone())?,
    };
    let config = model.config().clone();
    let layers = model.layer_table(lr_h, lr_w);
    say!(
        log,
        "ELSR x{} nf={} convs={} activation={:?} residual={}",
        config.scale,
        config.nf,
        config.nb_convs,
        config.activation,
        config.residual
    );
    say!(log, "{:<18} {:<16} {:>8} {:>14}", "layer", "shape", "params", "flops");
    for l in &layers {
        let shape = if l.shape.is_empty() {
            "-".to_string()
        } else {
            format!("{:?}", l.shape)
        };
        say!(log, "{:<18} {:<16} {:>8} {:>14}", l.name, shape, l.params, l.flops);
    }
    let params = model.count_params();
    let flops = model.count_flops(lr_h, lr_w);
    say!(log, "params: {params}");
    say!(
        log,
        "flops: {flops} ({:.3} G) for a {lr_h}x{lr_w} LR input -> {}x{}",
        flops as f64 / 1e9,
        lr_h * config.scale,
        lr_w * config.scale
    );
    say!(log, "note: 1 MAC = 2 FLOPs; activations and the residual add count 1 FLOP per element");
    Ok(InfoReport {
        config,
        layers,
        params,
        flops,
        lr_size: (lr_h, lr_w),
    })
}
