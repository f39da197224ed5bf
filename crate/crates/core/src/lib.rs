//! Multichannel speech beamforming toolkit.
//!
//! The crate covers everything that is not a neural network: time-frequency
//! analysis and filter-and-sum application ([`dsp`]), image-source room
//! simulation ([`room`]), the mask-based GEV and delay-and-sum beamformers
//! ([`beamform`]), evaluation metrics ([`metrics`]) and the on-disk formats
//! shared by the command-line tools ([`io`]).

pub mod beamform;
pub mod dsp;
pub mod error;
pub mod io;
pub mod metrics;
pub mod room;

pub use error::{Error, Result};
pub use num_complex::Complex64;
