use crate::dsp::{apply_filters, FilterTensor, MultichannelSpectrogram};
use crate::Result;

/// Energies of the speech and noise images after the same filter-and-sum.
pub fn filtered_energies(
    filters: &FilterTensor,
    clean: &MultichannelSpectrogram,
    noise: &MultichannelSpectrogram,
) -> Result<(f64, f64)> {
    let s = apply_filters(filters, clean)?.energy();
    let n = apply_filters(filters, noise)?.energy();
    Ok((s, n))
}

/// `10 log10(E_s / E_n)`; `+inf` when the noise energy is zero.
pub fn snr_from_energies(speech: f64, noise: f64) -> f64 {
    if noise <= 0.0 {
        f64::INFINITY
    } else {
        10.0 * (speech / noise).log10()
    }
}

/// SNR of the beamformer output, measured by filtering the speech and noise
/// images separately.
pub fn snr_filtered(
    filters: &FilterTensor,
    clean: &MultichannelSpectrogram,
    noise: &MultichannelSpectrogram,
) -> Result<f64> {
    let (s, n) = filtered_energies(filters, clean, noise)?;
    Ok(snr_from_energies(s, n))
}
