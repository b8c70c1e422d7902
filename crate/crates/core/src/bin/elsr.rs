use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use elsr::model::{Activation, ModelConfig};
use elsr::pipeline::{
    cmd_adapt, cmd_eval, cmd_info, cmd_infer, cmd_prepare_data, cmd_train, generate_toy_dataset, EvalSource,
    InferOptions, InfoSource, ToyConfig, TrainOptions,
};

#[derive(Parser)]
#[command(name = "elsr", version, about = "Tiny video super-resolution: data prep, staged training, inference, eval")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Seed for every random draw (init, patch sampling, probes, toy data).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Stage file for `train`.
    #[arg(long, global = true, default_value = "configs/elsr_stages.conf")]
    config: PathBuf,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Bicubic-downscale an HR frame tree, or generate the synthetic toy dataset.
    PrepareData {
        /// HR tree to downscale.
        #[arg(required_unless_present = "toy")]
        hr_root: Option<PathBuf>,
        /// Output LR tree.
        #[arg(required_unless_present = "toy")]
        out_root: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        scale: usize,
        /// Write a toy dataset (HR plus X2/X4 LR) under this root instead.
        #[arg(long, conflicts_with_all = ["hr_root", "out_root"])]
        toy: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        toy_sequences: usize,
    },
    /// Run one training stage.
    Train {
        /// Dataset root in the REDS layout.
        data_root: PathBuf,
        /// Output weight archive; the loss trace goes to `<out>.loss.csv`.
        out: PathBuf,
        #[arg(long)]
        stage: u32,
        /// Shrink the stage to K iterations, scaling milestones.
        #[arg(long)]
        iters_override: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        patch_size: Option<usize>,
        /// Starting weights; defaults to `stage{N-1}.elsr` next to OUT.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long, default_value_t = 6)]
        nf: usize,
        #[arg(long, default_value_t = 100)]
        log_every: usize,
    },
    /// Tile x2 weights into an equivalent x4 archive.
    Adapt { x2_weights: PathBuf, out: PathBuf },
    /// Super-resolve a PNG or a directory of PNGs.
    Infer {
        weights: PathBuf,
        input: PathBuf,
        out_dir: PathBuf,
        /// Also write `<stem>_bicubic.png` next to each output.
        #[arg(long)]
        baseline: bool,
    },
    /// PSNR of model output (or existing frames, or bicubic) against HR.
    Eval {
        /// HR reference tree.
        #[arg(long)]
        hr: PathBuf,
        #[arg(long, requires = "lr")]
        weights: Option<PathBuf>,
        #[arg(long)]
        lr: Option<PathBuf>,
        /// Score frames already on disk.
        #[arg(long, conflicts_with_all = ["weights", "lr", "bicubic"])]
        pred: Option<PathBuf>,
        /// Score bicubic upsampling of `--lr` at this scale.
        #[arg(long, requires = "lr", conflicts_with = "weights")]
        bicubic: Option<usize>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Layer table, parameter count and FLOPs.
    Info {
        /// Weight archive; without it a fresh model of --scale/--nf is described.
        weights: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        scale: usize,
        #[arg(long, default_value_t = 6)]
        nf: usize,
        #[arg(long, default_value = "prelu")]
        activation: Activation,
        #[arg(long, default_value_t = 180)]
        height: usize,
        #[arg(long, default_value_t = 320)]
        width: usize,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let Common { seed, config, quiet } = cli.common;
    let mut stdout = std::io::stdout();
    let mut sink = std::io::sink();
    let log: &mut dyn Write = if quiet { &mut sink } else { &mut stdout };

    match cli.command {
        Command::PrepareData {
            hr_root,
            out_root,
            scale,
            toy,
            toy_sequences,
        } => {
            let failed: Vec<(String, String)> = if let Some(root) = toy {
                let cfg = ToyConfig {
                    train_sequences: toy_sequences,
                    seed,
                    ..ToyConfig::default()
                };
                let report = generate_toy_dataset(&root, &cfg, log)?;
                writeln!(log, "toy dataset: {} HR frames under {}", report.hr_frames, root.display())?;
                report.lr.into_iter().flat_map(|(_, _, r)| r.failed).collect()
            } else {
                let (hr, out) = (hr_root.expect("clap"), out_root.expect("clap"));
                cmd_prepare_data(&hr, &out, scale, log)?.failed
            };
            if !failed.is_empty() {
                for (frame, err) in &failed {
                    eprintln!("error: {frame}: {err}");
                }
                bail!("{} frame(s) failed", failed.len());
            }
        }
        Command::Train {
            data_root,
            out,
            stage,
            iters_override,
            batch_size,
            patch_size,
            init,
            nf,
            log_every,
        } => {
            let opts = TrainOptions {
                seed,
                iters_override,
                batch_size,
                patch_size_hr: patch_size,
                init,
                nf,
                log_every,
                ..TrainOptions::new(config, data_root, out, stage)
            };
            cmd_train(&opts, log)?;
        }
        Command::Adapt { x2_weights, out } => {
            cmd_adapt(&x2_weights, &out, seed, log)?;
        }
        Command::Infer {
            weights,
            input,
            out_dir,
            baseline,
        } => {
            let opts = InferOptions {
                weights,
                input,
                out_dir,
                baseline,
            };
            let report = cmd_infer(&opts, log)?;
            if !report.failed.is_empty() {
                for (path, err) in &report.failed {
                    eprintln!("error: {}: {err}", path.display());
                }
                bail!("{} input(s) failed", report.failed.len());
            }
        }
        Command::Eval {
            hr,
            weights,
            lr,
            pred,
            bicubic,
            report,
        } => {
            let source = match (weights, pred, bicubic) {
                (Some(weights), None, None) => EvalSource::Model {
                    weights,
                    lr_dir: lr.context("--weights needs --lr")?,
                },
                (None, Some(dir), None) => EvalSource::Predictions(dir),
                (None, None, Some(scale)) => EvalSource::Bicubic {
                    lr_dir: lr.context("--bicubic needs --lr")?,
                    scale,
                },
                _ => bail!("give exactly one of --weights, --pred or --bicubic"),
            };
            cmd_eval(&source, &hr, report.as_deref(), log)?;
        }
        Command::Info {
            weights,
            scale,
            nf,
            activation,
            height,
            width,
        } => {
            let source = match weights {
                Some(path) => InfoSource::Weights(path),
                None => InfoSource::Config(ModelConfig {
                    activation,
                    ..ModelConfig::new(scale, nf)
                }),
            };
            cmd_info(&source, height, width, log)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
