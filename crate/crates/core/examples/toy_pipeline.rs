//! The whole pipeline at desk scale: synthetic data, a short x2 stage,
//! weight adaptation, a short x4 stage, then PSNR against bicubic on the
//! held-out split. Takes a couple of minutes on one core.
//!
//!     cargo run --release --example toy_pipeline [-- WORK_DIR]

use std::path::PathBuf;

use elsr::pipeline::{cmd_eval, cmd_train, generate_toy_dataset, DatasetLayout, EvalSource, Split, ToyConfig, TrainOptions};

const STAGES: &str = "\
[stage.1]
id = I
scale = 2
loss = MSE
batch_size = 16
patch_size_hr = 64
total_iters = 2000
lr_init = 1e-2
lr_milestones = 1200, 1600
lr_gamma = 0.5
init_from = scratch

[stage.2]
id = II
scale = 4
loss = MSE
batch_size = 16
patch_size_hr = 64
total_iters = 5000
lr_init = 2e-3
lr_milestones = 3000, 4000
lr_gamma = 0.5
init_from = x2-adapted
";

fn main() -> elsr::Result<()> {
    let tmp = tempfile::tempdir()?;
    let work = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| tmp.path().to_path_buf());
    let mut log = std::io::stdout();

    let data = work.join("toy");
    generate_toy_dataset(&data, &ToyConfig::default(), &mut std::io::sink())?;
    let config = work.join("stages.conf");
    std::fs::create_dir_all(&work)?;
    std::fs::write(&config, STAGES)?;

    let runs = work.join("runs");
    for stage in [1, 2] {
        let opts = TrainOptions {
            log_every: 500,
            ..TrainOptions::new(&config, &data, runs.join(format!("stage{stage}.elsr")), stage)
        };
        cmd_train(&opts, &mut log)?;
    }

    let val = DatasetLayout::new(&data, Split::Val);
    let model = EvalSource::Model {
        weights: runs.join("stage2.elsr"),
        lr_dir: val.lr_dir(4),
    };
    let bicubic = EvalSource::Bicubic {
        lr_dir: val.lr_dir(4),
        scale: 4,
    };
    let sink = &mut std::io::sink();
    let ours = cmd_eval(&model, &val.hr_dir(), None, sink)?.mean_db;
    let base = cmd_eval(&bicubic, &val.hr_dir(), None, sink)?.mean_db;
    println!("held-out PSNR: model {ours:.3} dB, bicubic {base:.3} dB");
    Ok(())
}
