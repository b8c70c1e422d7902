//! Extreme low-power super-resolution.
//!
//! A four-convolution network with one PReLU, one residual and a
//! pixel-shuffle tail, together with everything needed to train and
//! evaluate it without external frameworks:
//!
//! - [`tensor`]: NCHW tensors and the forward kernels.
//! - [`autograd`]: gradient tape, L1/MSE losses, Adam, step schedules and
//!   the staged training loop.
//! - [`model`]: the network, its binary weight archive and ×2 → ×4 weight
//!   adaptation.
//! - [`imaging`]: PNG I/O, MATLAB-style bicubic resampling, PSNR.
//! - [`pipeline`]: dataset layout, toy data, and the commands behind the
//!   `elsr` binary.

pub mod autograd;
pub mod error;
pub mod imaging;
pub mod model;
pub mod pipeline;
pub mod tensor;

pub use error::{Error, Result};
pub use model::{ElsrModel, ModelConfig};
pub use tensor::{ConvParams, Tensor};
