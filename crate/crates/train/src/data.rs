//! Training examples from manifests, on-the-fly simulation or memory.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use wbeam_core::dsp::{stft, stft_multichannel, AnalysisConfig, MultichannelSpectrogram};
use wbeam_core::io::wav::read_wav;
use wbeam_core::io::{Manifest, ManifestRecord};
use wbeam_core::room::sources::SourceLibrary;
use wbeam_core::room::{
    scenario_rng, simulate_utterance, DatasetKind, ScenarioSampler, SimulationOptions, Split,
};
use wbeam_neural::Example;

use crate::{Result, TrainError};

/// Indexed collection of examples. `crop` supplies the random segment
/// offset; without it segments start at frame 0.
pub trait ExampleSource {
    fn len(&self) -> usize;
    fn load(&self, index: usize, crop: Option<&mut ChaCha8Rng>) -> Result<Example>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Exactly `frames` frames starting at `offset`, zero-padded past the end.
pub fn crop_or_pad(spec: &MultichannelSpectrogram, offset: usize, frames: usize) -> MultichannelSpectrogram {
    let mut out = MultichannelSpectrogram::zeros(frames, spec.channels(), spec.config);
    let row = spec.bins() * spec.channels();
    let take = frames.min(spec.frames().saturating_sub(offset));
    out.data_mut()[..take * row].copy_from_slice(&spec.data()[offset * row..(offset + take) * row]);
    out
}

/// Uniform crop offset when the utterance is longer than the segment.
pub fn draw_offset(total: usize, frames: usize, rng: &mut impl Rng) -> usize {
    if total > frames {
        rng.gen_range(0..=total - frames)
    } else {
        0
    }
}

/// Example from a mixture and its reference-channel speech, cut to
/// `frames` frames.
pub fn segment_example(
    noisy: &MultichannelSpectrogram,
    reference: &MultichannelSpectrogram,
    frames: usize,
    crop: Option<&mut ChaCha8Rng>,
) -> Result<Example> {
    let offset = crop.map_or(0, |rng| draw_offset(noisy.frames(), frames, rng));
    Ok(Example::from_spectrograms(
        &crop_or_pad(noisy, offset, frames),
        &crop_or_pad(reference, offset, frames),
    )?)
}

/// Records of a manifest, read from disk on demand.
pub struct ManifestSource {
    manifest: Manifest,
    records: Vec<usize>,
    frames: usize,
    analysis: AnalysisConfig,
}

impl ManifestSource {
    /// Records of `split` whose dataset is one of `kinds`, in manifest order.
    pub fn new(manifest: Manifest, split: Split, kinds: &[DatasetKind], frames: usize) -> Self {
        let records = manifest
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.split == split && kinds.contains(&r.dataset))
            .map(|(i, _)| i)
            .collect();
        Self {
            manifest,
            records,
            frames,
            analysis: AnalysisConfig::default(),
        }
    }

    pub fn record(&self, index: usize) -> &ManifestRecord {
        &self.manifest.records[self.records[index]]
    }
}

impl ExampleSource for ManifestSource {
    fn len(&self) -> usize {
        self.records.len()
    }

    fn load(&self, index: usize, crop: Option<&mut ChaCha8Rng>) -> Result<Example> {
        let rec = self.record(index);
        let mix = read_wav(&self.manifest.resolve(&rec.mixture))?;
        let reference = read_wav(&self.manifest.resolve(&rec.reference))?.channel(0);
        let noisy = stft_multichannel(&mix, &self.analysis)?;
        let reference = stft(&reference, &self.analysis)?;
        segment_example(&noisy, &reference, self.frames, crop)
    }
}

/// Scenes drawn and rendered on demand; index `i` always yields the same
/// scene. Kinds alternate when more than one is requested.
pub struct SimulatedSource {
    pub sampler: ScenarioSampler,
    pub library: SourceLibrary,
    pub options: SimulationOptions,
    pub seed: u64,
    pub split: Split,
    pub kinds: Vec<DatasetKind>,
    pub count: usize,
    pub frames: usize,
}

impl ExampleSource for SimulatedSource {
    fn len(&self) -> usize {
        self.count
    }

    fn load(&self, index: usize, crop: Option<&mut ChaCha8Rng>) -> Result<Example> {
        if self.kinds.is_empty() {
            return Err(TrainError::Config("no dataset kinds to simulate".into()));
        }
        let kind = self.kinds[index % self.kinds.len()];
        let mut rng = scenario_rng(self.seed, self.split, kind, (index / self.kinds.len()) as u64);
        let scene = self.sampler.sample(&mut rng, self.split, kind);
        let utt = simulate_utterance(&scene, &self.library, &self.options)?;
        let cfg = AnalysisConfig::default();
        let noisy = stft_multichannel(&utt.mixture, &cfg)?;
        let reference = stft(&utt.reference, &cfg)?;
        segment_example(&noisy, &reference, self.frames, crop)
    }
}

/// Ready-made examples, used whole.
pub struct MemorySource(pub Vec<Example>);

impl ExampleSource for MemorySource {
    fn len(&self) -> usize {
        self.0.len()
    }

    fn load(&self, index: usize, _crop: Option<&mut ChaCha8Rng>) -> Result<Example> {
        Ok(self.0[index].clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use wbeam_core::Complex64;

    fn ramp(frames: usize) -> MultichannelSpectrogram {
        let cfg = AnalysisConfig::default();
        let data = (0..frames * cfg.bins())
            .map(|i| Complex64::new((i / cfg.bins()) as f64 + 1.0, 0.0))
            .collect();
        MultichannelSpectrogram::from_data(frames, 1, data, cfg).unwrap()
    }

    #[test]
    fn long_inputs_are_cropped() {
        let s = ramp(300);
        let c = crop_or_pad(&s, 10, 256);
        assert_eq!(c.frames(), 256);
        assert_eq!(c.get(0, 5, 0).re, 11.0);
        assert_eq!(c.get(255, 5, 0).re, 266.0);
    }

    #[test]
    fn short_inputs_are_zero_padded() {
        let c = crop_or_pad(&ramp(100), 0, 256);
        assert_eq!(c.get(99, 0, 0).re, 100.0);
        assert!(c.data()[100 * 512..].iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn offsets_stay_in_range_and_repeat_by_seed() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| draw_offset(400, 256, &mut rng)).collect::<Vec<_>>()
        };
        let a = draw(3);
        assert!(a.iter().all(|&o| o <= 144));
        assert_eq!(a, draw(3));
        assert_ne!(a, draw(4));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(draw_offset(256, 256, &mut rng), 0);
    }
}
