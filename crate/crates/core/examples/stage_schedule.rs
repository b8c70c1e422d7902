//! Loads the six-stage training plan and prints every stage with its
//! learning rate at each step boundary. A stage shrunk with an iteration
//! override keeps its milestones at the same fractions.
//!
//!     cargo run --example stage_schedule [-- configs/elsr_stages.conf]

use std::path::PathBuf;

use elsr::autograd::StagePlan;
use elsr::pipeline::describe_lr_schedule;

fn main() -> elsr::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/elsr_stages.conf")));
    let plan = StagePlan::load(&path)?;
    for stage in &plan.stages {
        println!("{stage}");
        println!("    lr: {}", describe_lr_schedule(stage)?);
        let short = stage.with_iters_override(1000)?;
        println!("    shrunk to 1000 iters: milestones {:?}", short.lr_milestones);
    }
    Ok(())
}
