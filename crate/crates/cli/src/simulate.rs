use std::path::{Path, PathBuf};

use wbeam_core::io::wav::{write_wav, write_wav_mono};
use wbeam_core::io::{Manifest, ManifestRecord, RunConfig};
use wbeam_core::room::sources::SourceLibrary;
use wbeam_core::room::{
    scenario_rng, simulate_utterance, DatasetKind, ScenarioSampler, SimulationOptions, Split,
};

use crate::{CliError, Result};

pub const SIMULATE_SCHEMA: &[(&str, &str)] = &[
    ("seed", "1"),
    ("train_static", "1000"),
    ("train_moving", "0"),
    ("val_static", "64"),
    ("val_moving", "0"),
    ("test_static", "1024"),
    ("test_moving", "0"),
    ("reflection_order", "17"),
    ("snr_mean_db", "5"),
    ("snr_std_db", "5"),
    ("noise_speed", "0.2"),
    ("clip_frames", "256"),
    ("speech_dir", ""),
    ("noise_dir", ""),
];

pub const MANIFEST_NAME: &str = "manifest.jsonl";

fn utterance_id(split: Split, kind: DatasetKind, index: usize) -> String {
    format!("{split}-{}-{index:05}", kind.as_str())
}

/// Renders every requested utterance into `out/audio` and writes
/// `out/manifest.jsonl`. Validation and test records keep the speech and noise
/// images needed for the filtered SNR.
pub fn simulate(rc: &RunConfig, out: &Path) -> Result<PathBuf> {
    let seed: u64 = rc.parse("seed")?;
    let clip_frames: usize = rc.parse("clip_frames")?;
    if clip_frames == 0 {
        return Err(CliError::Config("clip_frames must be positive".into()));
    }
    let options = SimulationOptions {
        clip_len: (clip_frames - 1) * 256 + 1024,
        ..SimulationOptions::default()
    };
    let sampler = ScenarioSampler {
        reflection_order: rc.parse("reflection_order")?,
        snr_mean_db: rc.parse("snr_mean_db")?,
        snr_std_db: rc.parse("snr_std_db")?,
        noise_speed: rc.parse("noise_speed")?,
        clip_secs: options.clip_len as f64 / options.sample_rate as f64,
    };
    if !(sampler.snr_std_db >= 0.0) || !sampler.snr_mean_db.is_finite() {
        return Err(CliError::Config("SNR distribution must be finite with nonnegative spread".into()));
    }
    let library = match (rc.get("speech_dir")?, rc.get("noise_dir")?) {
        ("", "") => SourceLibrary::Synthetic,
        ("", _) | (_, "") => {
            return Err(CliError::Config("speech_dir and noise_dir must be given together".into()))
        }
        (s, n) => SourceLibrary::from_dirs(Path::new(s), Path::new(n))?,
    };

    let audio = out.join("audio");
    std::fs::create_dir_all(&audio).map_err(|e| wbeam_core::Error::Io { path: audio.clone(), source: e })?;
    let mut manifest = Manifest::new(rc.hash(None), out);
    for split in [Split::Train, Split::Val, Split::Test] {
        for kind in [DatasetKind::Static, DatasetKind::Moving] {
            let count: usize = rc.parse(&format!("{split}_{}", kind.as_str()))?;
            for index in 0..count {
                let id = utterance_id(split, kind, index);
                let mut rng = scenario_rng(seed, split, kind, index as u64);
                let scene = sampler.sample(&mut rng, split, kind);
                let utt = simulate_utterance(&scene, &library, &options)?;
                let rel = |suffix: &str| PathBuf::from("audio").join(format!("{id}.{suffix}.wav"));
                let keep_images = split != Split::Train;
                let record = ManifestRecord {
                    id: id.clone(),
                    split,
                    dataset: kind,
                    mixture: rel("mix"),
                    reference: rel("ref"),
                    noise_at_reference: rel("noise"),
                    speech_image: keep_images.then(|| rel("speech_img")),
                    noise_image: keep_images.then(|| rel("noise_img")),
                    scenario: scene,
                    realized_snr_db: utt.realized_snr_db,
                };
                write_wav(&out.join(&record.mixture), &utt.mixture)?;
                write_wav_mono(&out.join(&record.reference), &utt.reference)?;
                write_wav_mono(&out.join(&record.noise_at_reference), &utt.noise_at_reference)?;
                if let (Some(s), Some(n)) = (&record.speech_image, &record.noise_image) {
                    write_wav(&out.join(s), &utt.speech_image)?;
                    write_wav(&out.join(n), &utt.noise_image)?;
                }
                log::info!("{id}: SNR {:.2} dB", utt.realized_snr_db);
                manifest.records.push(record);
            }
        }
    }
    let path = out.join(MANIFEST_NAME);
    manifest.write(&path)?;
    Ok(path)
}
