//! Reverse-mode gradients, losses, Adam, step schedules and the stage
//! training loop.

pub mod adam;
pub mod loss;
pub mod schedule;
pub mod tape;
pub mod train;

pub use adam::{adam_step, AdamState, ParamSlot};
pub use loss::{l1_loss, mse_loss, LossKind};
pub use schedule::{elsr_schedule, InitFrom, StagePlan, TrainStageConfig};
pub use tape::{GradTape, Gradients, Var};
pub use train::{run_stage, run_stage_with, sample_patch, train_step, PatchSampler, StageOutcome, TracePoint};
