//! PNG I/O, bicubic resampling and PSNR evaluation.

mod buffer;
pub mod eval;
pub mod metrics;
pub mod resize;

pub use buffer::{batch_to_tensor, encode_png, from_tensor, quantize, read_png, to_tensor, write_png, ImageBuffer};
pub use eval::{eval_bicubic, eval_sequence, score_dirs, super_resolve, EvalReport, FrameScore};
pub use metrics::{psnr, psnr_from_mse};
pub use resize::{bicubic_downscale, bicubic_resize, bicubic_upscale};
