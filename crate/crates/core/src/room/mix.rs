use crate::dsp::{MultichannelWaveform, Waveform};
use crate::{Error, Result};

/// Output of [`mix_at_snr`]. All fields share one length.
#[derive(Debug, Clone)]
pub struct Mixture {
    pub mixture: MultichannelWaveform,
    /// Noise-free speech image at the reference microphone (`S_R`).
    pub reference: Waveform,
    /// Scaled noise sum at the reference microphone.
    pub noise_at_reference: Waveform,
    pub speech_image: MultichannelWaveform,
    /// Scaled noise sum at every microphone.
    pub noise_image: MultichannelWaveform,
    pub noise_gain: f64,
    pub realized_snr_db: f64,
}

fn channel_power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64
}

/// Adds the noise images, scaled by one common gain, to the speech image so
/// that the speech-to-noise power ratio at `reference_channel` over the whole
/// clip equals `snr_db`. Shorter inputs are zero-padded.
pub fn mix_at_snr(
    speech_img: &MultichannelWaveform,
    noise_imgs: &[MultichannelWaveform],
    snr_db: f64,
    reference_channel: usize,
) -> Result<Mixture> {
    if noise_imgs.is_empty() {
        return Err(Error::UndefinedSnr("no noise images".into()));
    }
    let m = speech_img.num_channels();
    if reference_channel >= m {
        return Err(Error::InvalidArgument(format!(
            "reference channel {reference_channel} out of range for {m} channels"
        )));
    }
    if noise_imgs.iter().any(|n| n.num_channels() != m) {
        return Err(Error::ShapeMismatch("noise images differ in channel count".into()));
    }
    let len = noise_imgs
        .iter()
        .map(MultichannelWaveform::len)
        .chain(std::iter::once(speech_img.len()))
        .max()
        .unwrap_or(0);
    let fs = speech_img.sample_rate();

    let mut speech = speech_img.clone();
    speech.resize(len);
    let mut noise = MultichannelWaveform::zeros(m, len, fs);
    for n in noise_imgs {
        let mut n = n.clone();
        n.resize(len);
        noise.add_assign(&n)?;
    }

    let ps = channel_power(&speech.channels()[reference_channel]);
    let pn = channel_power(&noise.channels()[reference_channel]);
    if ps <= 0.0 {
        return Err(Error::UndefinedSnr("speech is silent at the reference channel".into()));
    }
    if pn <= 0.0 {
        return Err(Error::UndefinedSnr("noise is silent at the reference channel".into()));
    }
    let gain = (ps / (pn * 10f64.powf(snr_db / 10.0))).sqrt();
    noise.scale(gain);

    let mut mixture = speech.clone();
    mixture.add_assign(&noise)?;
    mixture.reference_index = Some(reference_channel);
    let realized = 10.0 * (ps / channel_power(&noise.channels()[reference_channel])).log10();
    Ok(Mixture {
        reference: speech.channel(reference_channel),
        noise_at_reference: noise.channel(reference_channel),
        mixture,
        speech_image: speech,
        noise_image: noise,
        noise_gain: gain,
        realized_snr_db: realized,
    })
}
