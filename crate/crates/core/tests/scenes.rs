//! Simulated scenes through the classic processing chain.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wbeam_core::beamform::{gev_filters, oracle_masks, GevOptions, DEFAULT_THETA};
use wbeam_core::dsp::{
    istft, stft, stft_multichannel, AnalysisConfig, FilterTensor, MultichannelWaveform, Waveform,
};
use wbeam_core::io::{Manifest, ManifestRecord};
use wbeam_core::metrics::snr_filtered;
use wbeam_core::room::sources::SourceLibrary;
use wbeam_core::room::{
    mix_at_snr, scenario_rng, simulate_utterance, DatasetKind, ScenarioSampler, SimulatedUtterance,
    SimulationOptions, Split,
};

fn scene(index: u64, kind: DatasetKind) -> SimulatedUtterance {
    let sampler = ScenarioSampler {
        reflection_order: 3,
        ..ScenarioSampler::default()
    };
    let opts = SimulationOptions {
        clip_len: 127 * 256 + 1024,
        ..SimulationOptions::default()
    };
    let mut rng = scenario_rng(31, Split::Test, kind, index);
    let sc = sampler.sample(&mut rng, Split::Test, kind);
    simulate_utterance(&sc, &SourceLibrary::Synthetic, &opts).unwrap()
}

fn oracle_gev_gain(u: &SimulatedUtterance, postfilter: bool) -> f64 {
    let cfg = AnalysisConfig::default();
    let noisy = stft_multichannel(&u.mixture, &cfg).unwrap();
    let s = stft_multichannel(&u.speech_image, &cfg).unwrap();
    let n = stft_multichannel(&u.noise_image, &cfg).unwrap();
    let (rs, rn) = oracle_masks(
        &stft(&u.reference, &cfg).unwrap(),
        &stft(&u.noise_at_reference, &cfg).unwrap(),
        DEFAULT_THETA,
    )
    .unwrap();
    let w = gev_filters(&noisy, &rs, &rn, GevOptions { postfilter, ..GevOptions::default() }).unwrap();
    let (t, f, m) = noisy.shape();
    snr_filtered(&w, &s, &n).unwrap() - snr_filtered(&FilterTensor::identity(t, f, m, 0), &s, &n).unwrap()
}

#[test]
fn oracle_gev_improves_static_scenes() {
    let gains: Vec<f64> = (0..3).map(|i| oracle_gev_gain(&scene(i, DatasetKind::Static), true)).collect();
    assert!(gains.iter().all(|&g| g > 0.0), "{gains:?}");
}

#[test]
fn identity_filter_recovers_scene_snr() {
    let cfg = AnalysisConfig::default();
    for kind in [DatasetKind::Static, DatasetKind::Moving] {
        let u = scene(1, kind);
        let s = stft_multichannel(&u.speech_image, &cfg).unwrap();
        let n = stft_multichannel(&u.noise_image, &cfg).unwrap();
        let (t, f, m) = s.shape();
        let got = snr_filtered(&FilterTensor::identity(t, f, m, 0), &s, &n).unwrap();
        assert!((got - u.realized_snr_db).abs() < 0.1, "{kind:?}: {got} vs {}", u.realized_snr_db);
    }
}

#[test]
fn manifest_round_trips_simulated_records() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = Manifest::new("abc".to_string(), dir.path());
    for i in 0..2 {
        let u = scene(i, DatasetKind::Moving);
        m.records.push(ManifestRecord {
            id: format!("test-moving-{i:05}"),
            split: Split::Test,
            dataset: DatasetKind::Moving,
            mixture: format!("audio/{i}.mix.wav").into(),
            reference: format!("audio/{i}.ref.wav").into(),
            noise_at_reference: format!("audio/{i}.noise.wav").into(),
            speech_image: None,
            noise_image: None,
            scenario: u.scenario.clone(),
            realized_snr_db: u.realized_snr_db,
        });
    }
    let path = dir.path().join("manifest.jsonl");
    m.write(&path).unwrap();
    let back = Manifest::read(&path).unwrap();
    assert_eq!(back.records, m.records);
    let first = std::fs::read(&path).unwrap();
    back.write(&path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
}

fn noise(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn interior_reconstruction(extra in 0usize..2000, seed in 0u64..1 << 40) {
        let cfg = AnalysisConfig { drop_dc: false, ..AnalysisConfig::default() };
        let x = Waveform::new(noise(4096 + extra, seed), 16_000).unwrap();
        let y = istft(&stft(&x, &cfg).unwrap(), &cfg).unwrap();
        let end = cfg.samples_for(cfg.frames_for(x.len()));
        for i in cfg.fft_size..end - cfg.fft_size {
            prop_assert!((x.samples[i] - y.samples[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn filtered_snr_ignores_global_complex_scale(seed in 0u64..1 << 40, re in -3.0f64..3.0, im in -3.0f64..3.0) {
        prop_assume!(re.hypot(im) > 1e-3);
        let cfg = AnalysisConfig::default();
        let wave = |s| MultichannelWaveform::new(vec![noise(3072, s), noise(3072, s + 1)], 16_000).unwrap();
        let s = stft_multichannel(&wave(seed), &cfg).unwrap();
        let n = stft_multichannel(&wave(seed ^ 0x55), &cfg).unwrap();
        let (t, f, m) = s.shape();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = FilterTensor::new(t, f, m, (0..t * f * 2 * m).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let mut scaled = w.clone();
        for px in scaled.values.chunks_exact_mut(2 * m) {
            for k in 0..m {
                let (a, b) = (px[k], px[m + k]);
                px[k] = a * re - b * im;
                px[m + k] = a * im + b * re;
            }
        }
        let a = snr_filtered(&w, &s, &n).unwrap();
        let b = snr_filtered(&scaled, &s, &n).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn mixing_hits_the_requested_snr(seed in 0u64..1 << 40, snr in -10.0f64..20.0) {
        let speech = MultichannelWaveform::new(vec![noise(2000, seed), noise(2000, seed + 1)], 16_000).unwrap();
        let n1 = MultichannelWaveform::new(vec![noise(1500, seed + 2), noise(1500, seed + 3)], 16_000).unwrap();
        let n2 = MultichannelWaveform::new(vec![noise(2000, seed + 4), noise(2000, seed + 5)], 16_000).unwrap();
        let mix = mix_at_snr(&speech, &[n1, n2], snr, 0).unwrap();
        let p = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let got = 10.0 * (p(&mix.reference.samples) / p(&mix.noise_at_reference.samples)).log10();
        prop_assert!((got - snr).abs() < 1e-6);
        prop_assert!((mix.realized_snr_db - snr).abs() < 1e-6);
    }
}
