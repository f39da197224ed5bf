//! Shoebox-room simulation of array recordings.
//!
//! Impulse responses come from the image-source method with a single
//! frequency-independent reflection coefficient on all six walls. Moving
//! sources are rendered block-wise with impulse responses re-evaluated along
//! the trajectory and linearly cross-faded.

mod dataset;
mod geometry;
mod ism;
mod mix;
mod render;
mod scenario;
pub mod sources;

pub use dataset::{simulate_utterance, SimulatedUtterance, SimulationOptions, LEVEL_TARGET_RMS};
pub use geometry::{
    array_positions, ArrayGeometry, DatasetKind, Point3, RoomConfig, ScenarioSpec, SourceId,
    SourceTrajectory, Split,
};
pub use ism::{image_source_ir, image_sources, ImageContribution, ImpulseResponse, SINC_HALF_WIDTH};
pub use mix::{mix_at_snr, Mixture};
pub use render::{render_moving, render_moving_hard_switch, render_static, DEFAULT_BLOCK_SIZE};
pub use scenario::{sample_scenario, scenario_rng, ScenarioSampler};
