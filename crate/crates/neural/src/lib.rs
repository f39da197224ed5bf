//! Dense `f64` tensors, convolutional layers with hand-written gradients,
//! U-Net and W-Net assembly, losses, Adam, checkpoints and tiled inference.

pub mod adam;
pub mod checkpoint;
pub mod error;
mod gemm;
pub mod infer;
pub mod layers;
pub mod loss;
pub mod params;
pub mod tensor;
pub mod unet;
pub mod wnet;

pub use adam::Adam;
pub use checkpoint::{build_timestamp, Checkpoint, CheckpointMeta};
pub use error::{NeuralError, Result};
pub use infer::{estimate_filters, FilterEstimator, TILE_DISCARD, TILE_FRAMES};
pub use params::{Param, ParamStore};
pub use tensor::Tensor;
pub use unet::{UNet, UNetSpec, UNetTape};
pub use wnet::{wnet_specs, Example, FilterUNet, Objective, WNet, WNetOutput};
