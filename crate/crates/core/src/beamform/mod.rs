//! Mask-based GEV beamforming and the delay-and-sum baseline.

mod das;
mod enhance;
mod gev;
pub mod hermitian;
mod masks;
mod psd;

pub use das::delay_and_sum;
pub use enhance::{das_enhance, gev_enhance, gev_filters, GevOptions};
pub use gev::{ban_postfilter, gev_weights, StaticFilter, DEFAULT_LOADING};
pub use hermitian::CMatrix;
pub use masks::{oracle_masks, Mask, MaskKind, DEFAULT_THETA};
pub use psd::{masked_cross_psd, CrossPsd};
