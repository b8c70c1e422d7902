//! Layer table, parameter count and FLOPs for the default x4 model and a
//! wider x2 variant.
//!
//!     cargo run --example model_info

use elsr::pipeline::{cmd_info, InfoSource};
use elsr::ModelConfig;

fn main() -> elsr::Result<()> {
    let mut out = std::io::stdout();
    let report = cmd_info(&InfoSource::Config(ModelConfig::default()), 180, 320, &mut out)?;
    println!("{:.2} GFLOPs per 180x320 frame\n", report.flops as f64 / 1e9);
    cmd_info(&InfoSource::Config(ModelConfig::new(2, 8)), 180, 320, &mut out)?;
    Ok(())
}
