//! Dataset layout, synthetic data and the commands behind the `elsr` binary.

pub mod commands;
pub mod layout;
pub mod toy;

pub use commands::{
    cmd_adapt, cmd_eval, cmd_info, cmd_infer, cmd_prepare_data, cmd_train, describe_lr_schedule, load_model,
    loss_csv_path, AdaptReport, EvalSource, InferOptions, InferReport, InfoReport, InfoSource, PrepareReport,
    TrainOptions, TrainReport,
};
pub use layout::{frame_name, sequence_name, DatasetLayout, Split};
pub use toy::{generate_toy_dataset, toy_frame, ToyConfig, ToyReport};
