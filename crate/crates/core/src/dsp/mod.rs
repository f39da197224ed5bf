//! Time-frequency analysis and synthesis, feature packing and filter-and-sum.

mod features;
mod filter;
pub mod resample;
mod stft;
mod waveform;

pub use features::{pack_features, unpack_features, FeatureTensor};
pub use filter::{apply_filters, FilterTensor};
pub use stft::{istft, stft, stft_multichannel, AnalysisConfig, MultichannelSpectrogram, WindowKind};
pub use waveform::{fft_convolve, MultichannelWaveform, Waveform, DEFAULT_SAMPLE_RATE};
