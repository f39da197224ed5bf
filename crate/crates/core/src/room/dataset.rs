use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::geometry::{DatasetKind, ScenarioSpec, SourceId};
use super::mix::mix_at_snr;
use super::render::{render_moving, render_static, DEFAULT_BLOCK_SIZE};
use super::sources::SourceLibrary;
use crate::dsp::{MultichannelWaveform, Waveform, DEFAULT_SAMPLE_RATE};
use crate::Result;

/// RMS of the mixture's reference channel after level normalisation.
pub const LEVEL_TARGET_RMS: f64 = 0.05;
const PEAK_LIMIT: f64 = 0.95;

#[derive(Debug, Clone, Copy)]
pub struct SimulationOptions {
    /// Samples per clip; rendered images are truncated to this length.
    pub clip_len: usize,
    pub block_size: usize,
    pub reference_channel: usize,
    pub sample_rate: u32,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            // 256 STFT frames at 1024/256.
            clip_len: 255 * 256 + 1024,
            block_size: DEFAULT_BLOCK_SIZE,
            reference_channel: 0,
            sample_rate: DEFAULT_SAMPLE_RATE,
        }
    }
}

/// One rendered scene with every decomposition needed for training and
/// evaluation. All signals share a common level normalisation.
#[derive(Debug, Clone)]
pub struct SimulatedUtterance {
    pub scenario: ScenarioSpec,
    pub kind: DatasetKind,
    pub mixture: MultichannelWaveform,
    pub reference: Waveform,
    pub noise_at_reference: Waveform,
    pub speech_image: MultichannelWaveform,
    pub noise_image: MultichannelWaveform,
    pub realized_snr_db: f64,
}

fn truncate(mut w: MultichannelWaveform, len: usize) -> MultichannelWaveform {
    w.resize(len);
    w
}

pub fn simulate_utterance(
    scenario: &ScenarioSpec,
    library: &SourceLibrary,
    opts: &SimulationOptions,
) -> Result<SimulatedUtterance> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let fs = opts.sample_rate;
    let speech = library.speech(&mut rng, opts.clip_len, fs);
    let speech_img = truncate(render_static(&speech, scenario, SourceId::Speech)?, opts.clip_len);
    let mut noise_imgs = Vec::with_capacity(scenario.noise_sources.len());
    let mut moving = false;
    for (i, traj) in scenario.noise_sources.iter().enumerate() {
        let src = library.noise(&mut rng, opts.clip_len, fs);
        let img = if traj.is_static() {
            render_static(&src, scenario, SourceId::Noise(i))?
        } else {
            moving = true;
            render_moving(&src, scenario, SourceId::Noise(i), opts.block_size)?
        };
        noise_imgs.push(truncate(img, opts.clip_len));
    }
    let mut mix = mix_at_snr(
        &speech_img,
        &noise_imgs,
        scenario.target_snr_db,
        opts.reference_channel,
    )?;

    let ref_ch = &mix.mixture.channels()[opts.reference_channel];
    let rms = (ref_ch.iter().map(|v| v * v).sum::<f64>() / ref_ch.len() as f64).sqrt();
    let peak = mix
        .mixture
        .channels()
        .iter()
        .flatten()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    let gain = (LEVEL_TARGET_RMS / rms).min(PEAK_LIMIT / peak);
    mix.mixture.scale(gain);
    mix.speech_image.scale(gain);
    mix.noise_image.scale(gain);
    mix.reference.scale(gain);
    mix.noise_at_reference.scale(gain);

    Ok(SimulatedUtterance {
        scenario: scenario.clone(),
        kind: if moving {
            DatasetKind::Moving
        } else {
            DatasetKind::Static
        },
        mixture: mix.mixture,
        reference: mix.reference,
        noise_at_reference: mix.noise_at_reference,
        speech_image: mix.speech_image,
        noise_image: mix.noise_image,
        realized_snr_db: mix.realized_snr_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::room::{scenario_rng, ScenarioSampler, Split};

    #[test]
    fn utterance_is_consistent() {
        let sampler = ScenarioSampler {
            reflection_order: 2,
            ..ScenarioSampler::default()
        };
        let opts = SimulationOptions {
            clip_len: 8000,
            ..SimulationOptions::default()
        };
        for kind in [DatasetKind::Static, DatasetKind::Moving] {
            let mut rng = scenario_rng(1, Split::Train, kind, 0);
            let sc = sampler.sample(&mut rng, Split::Train, kind);
            let u = simulate_utterance(&sc, &SourceLibrary::Synthetic, &opts).unwrap();
            assert_eq!(u.kind, kind);
            assert_eq!(u.mixture.len(), 8000);
            assert_eq!(u.mixture.num_channels(), 6);
            // mixture = speech image + noise image
            for m in 0..6 {
                for i in 0..8000 {
                    let s = u.speech_image.channels()[m][i] + u.noise_image.channels()[m][i];
                    assert!((u.mixture.channels()[m][i] - s).abs() < 1e-12);
                }
            }
            let p = u.mixture.channel(0).power().sqrt();
            assert!(p <= LEVEL_TARGET_RMS + 1e-12);
            assert!((u.realized_snr_db - sc.target_snr_db).abs() < 1e-6);
        }
    }
}
