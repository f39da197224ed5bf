//! On-disk formats: WAV audio, utterance manifests and key-value run
//! configurations.

pub mod config;
pub mod manifest;
pub mod wav;

pub use config::{config_hash, RunConfig};
pub use manifest::{Manifest, ManifestRecord};
