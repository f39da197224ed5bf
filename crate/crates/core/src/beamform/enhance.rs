use super::das::delay_and_sum;
use super::gev::{ban_postfilter, gev_weights, StaticFilter, DEFAULT_LOADING};
use super::masks::Mask;
use super::psd::masked_cross_psd;
use crate::dsp::{
    apply_filters, istft, stft_multichannel, AnalysisConfig, FilterTensor,
    MultichannelSpectrogram, MultichannelWaveform, Waveform,
};
use crate::room::ArrayGeometry;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GevOptions {
    pub loading: f64,
    pub postfilter: bool,
}

impl Default for GevOptions {
    fn default() -> Self {
        Self {
            loading: DEFAULT_LOADING,
            postfilter: true,
        }
    }
}

/// Static GEV filter (optionally BAN-normalised) estimated from masks on a
/// multichannel spectrogram, broadcast over all frames.
pub fn gev_filters(
    spec: &MultichannelSpectrogram,
    speech_mask: &Mask,
    noise_mask: &Mask,
    opts: GevOptions,
) -> Result<FilterTensor> {
    let phi_s = masked_cross_psd(spec, speech_mask)?;
    let phi_n = masked_cross_psd(spec, noise_mask)?;
    let mut w: StaticFilter = gev_weights(&phi_s, &phi_n, opts.loading)?;
    if opts.postfilter {
        let g = ban_postfilter(&w, &phi_n)?;
        w = w.with_gains(&g)?;
    }
    Ok(w.to_tensor(spec.frames()))
}

/// STFT, mask-based GEV, filter-and-sum and inverse STFT.
pub fn gev_enhance(
    mixture: &MultichannelWaveform,
    speech_mask: &Mask,
    noise_mask: &Mask,
    cfg: &AnalysisConfig,
    opts: GevOptions,
) -> Result<Waveform> {
    let spec = stft_multichannel(mixture, cfg)?;
    let filters = gev_filters(&spec, speech_mask, noise_mask, opts)?;
    istft(&apply_filters(&filters, &spec)?, cfg)
}

/// Delay-and-sum steered at `look_direction`.
pub fn das_enhance(
    mixture: &MultichannelWaveform,
    geom: &ArrayGeometry,
    look_direction: [f64; 3],
    cfg: &AnalysisConfig,
    sound_speed: f64,
) -> Result<Waveform> {
    let spec = stft_multichannel(mixture, cfg)?;
    let w = delay_and_sum(geom, look_direction, cfg, mixture.sample_rate(), sound_speed)?;
    istft(&apply_filters(&w.to_tensor(spec.frames()), &spec)?, cfg)
}
