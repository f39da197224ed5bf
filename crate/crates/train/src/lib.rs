//! Staged training of the W-Net beamformer.
//!
//! UNET1 first learns the reference magnitude (stage 1), UNET2 then learns
//! filters from the true magnitude (stage 2), and both are finally trained
//! together on the filter loss (joint). A joint model can be fine-tuned on a
//! mix of static and moving scenes, and the single-network comparator is
//! trained on the filter loss directly. Every stage keeps the parameters with
//! the lowest validation loss.

pub mod config;
pub mod data;
pub mod error;
pub mod log;
pub mod trainer;

pub use config::{DataMix, Stage, TrainConfig, TRAIN_SCHEMA};
pub use data::{ExampleSource, ManifestSource, MemorySource, SimulatedSource};
pub use error::{Result, TrainError};
pub use log::{LogRow, TrainLog};
pub use trainer::{
    best_index, finetune_moving, select_best, train, train_joint, train_stage1, train_stage2,
    trained_ids, validation_loss, Model, TrainOutcome,
};
