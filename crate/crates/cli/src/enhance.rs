use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use wbeam_core::beamform::{
    delay_and_sum, gev_filters, oracle_masks, GevOptions, DEFAULT_THETA,
};
use wbeam_core::dsp::{
    apply_filters, istft, stft, stft_multichannel, AnalysisConfig, FilterTensor, MultichannelSpectrogram,
    MultichannelWaveform, Waveform,
};
use wbeam_core::io::wav::{read_wav, write_wav_mono};
use wbeam_core::io::{Manifest, ManifestRecord};
use wbeam_core::metrics::{filtered_energies, FilteredEnergies};
use wbeam_neural::{estimate_filters, Checkpoint, FilterEstimator, TILE_DISCARD, TILE_FRAMES};
use wbeam_train::Model;

use crate::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    RawCh1,
    Das,
    Gev,
    GevPost,
    UnetBf,
    WnetBf,
    WnetBfM,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::RawCh1,
        Method::Das,
        Method::Gev,
        Method::GevPost,
        Method::UnetBf,
        Method::WnetBf,
        Method::WnetBfM,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::RawCh1 => "raw-ch1",
            Method::Das => "das",
            Method::Gev => "gev",
            Method::GevPost => "gev+post",
            Method::UnetBf => "unet-bf",
            Method::WnetBf => "wnet-bf",
            Method::WnetBfM => "wnet-bf-m",
        }
    }

    pub fn needs_checkpoint(self) -> bool {
        matches!(self, Method::UnetBf | Method::WnetBf | Method::WnetBfM)
    }
}

impl FromStr for Method {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.as_str()).collect();
                CliError::Config(format!("unknown method `{s}`; expected one of {}", names.join(", ")))
            })
    }
}

/// Written next to the enhanced files; ties them to their inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnhanceInfo {
    pub method: String,
    pub manifest_config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_stage: Option<String>,
}

pub const INFO_NAME: &str = "enhance.json";

impl EnhanceInfo {
    pub fn read(dir: &Path) -> Result<Option<Self>> {
        let path = dir.join(INFO_NAME);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path)
            .map_err(|e| wbeam_core::Error::Io { path: path.clone(), source: e })?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(INFO_NAME);
        let text = serde_json::to_string_pretty(self).expect("info serialises");
        std::fs::write(&path, text).map_err(|e| wbeam_core::Error::Io { path, source: e }.into())
    }
}

fn load_model(path: &Path, method: Method) -> Result<(Checkpoint, Model)> {
    let ckpt = Checkpoint::load(path)?;
    let model = Model::from_checkpoint(&ckpt)?;
    let ok = matches!(
        (&model, method),
        (Model::UNetBf(_), Method::UnetBf) | (Model::WNet(_), Method::WnetBf | Method::WnetBfM)
    );
    if !ok {
        return Err(CliError::Config(format!(
            "checkpoint {} (stage {}) does not hold a {} model",
            path.display(),
            ckpt.meta.stage,
            method.as_str()
        )));
    }
    Ok((ckpt, model))
}

fn unit_towards(from: [f64; 3], to: [f64; 3]) -> [f64; 3] {
    let d = [to[0] - from[0], to[1] - from[1], to[2] - from[2]];
    let n = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    [d[0] / n, d[1] / n, d[2] / n]
}

/// Enhancement of one utterance: the filters and the output waveform,
/// trimmed or padded to the mixture length.
pub struct Enhanced {
    pub filters: FilterTensor,
    pub output: Waveform,
}

/// Filters for `method` on one record. Mask-based methods use oracle masks
/// from the reference-channel speech and noise.
pub fn method_filters(
    manifest: &Manifest,
    record: &ManifestRecord,
    method: Method,
    model: Option<(&Model, &Checkpoint)>,
    noisy: &MultichannelSpectrogram,
    sample_rate: u32,
) -> Result<FilterTensor> {
    let cfg = noisy.config;
    let (t, f, m) = noisy.shape();
    Ok(match method {
        Method::RawCh1 => FilterTensor::identity(t, f, m, 0),
        Method::Das => {
            let sc = &record.scenario;
            let look = unit_towards(sc.array.center, sc.speech_source.start);
            delay_and_sum(&sc.array, look, &cfg, sample_rate, sc.room.sound_speed)?.to_tensor(t)
        }
        Method::Gev | Method::GevPost => {
            let clean = read_wav(&manifest.resolve(&record.reference))?.channel(0);
            let noise = read_wav(&manifest.resolve(&record.noise_at_reference))?.channel(0);
            let (rs, rn) = oracle_masks(&stft(&clean, &cfg)?, &stft(&noise, &cfg)?, DEFAULT_THETA)?;
            let opts = GevOptions {
                postfilter: method == Method::GevPost,
                ..GevOptions::default()
            };
            gev_filters(noisy, &rs, &rn, opts)?
        }
        Method::UnetBf | Method::WnetBf | Method::WnetBfM => {
            let (model, ckpt) = model.ok_or_else(|| {
                CliError::Config(format!("method {} needs --checkpoint", method.as_str()))
            })?;
            let est: &dyn FilterEstimator = match model {
                Model::WNet(n) => n,
                Model::UNetBf(n) => n,
            };
            estimate_filters(est, &ckpt.store, noisy, TILE_FRAMES, TILE_DISCARD)?
        }
    })
}

/// Runs `method` on one record and, when the manifest kept the speech and
/// noise images, returns their energies after the same filters.
pub fn enhance_record(
    manifest: &Manifest,
    record: &ManifestRecord,
    method: Method,
    model: Option<(&Model, &Checkpoint)>,
) -> Result<(Enhanced, Option<FilteredEnergies>)> {
    let cfg = AnalysisConfig::default();
    let mix = read_wav(&manifest.resolve(&record.mixture))?;
    let len = mix.len();
    if method == Method::RawCh1 {
        // Bit-exact copy of the first channel.
        let output = mix.channel(0);
        let spec = stft_multichannel(&mix, &cfg)?;
        let (t, f, m) = spec.shape();
        let filters = FilterTensor::identity(t, f, m, 0);
        let energies = image_energies(manifest, record, &filters, &cfg)?;
        return Ok((Enhanced { filters, output }, energies));
    }
    let noisy = stft_multichannel(&mix, &cfg)?;
    let filters = method_filters(manifest, record, method, model, &noisy, mix.sample_rate())?;
    let mut output = istft(&apply_filters(&filters, &noisy)?, &cfg)?;
    output.samples.resize(len, 0.0);
    let energies = image_energies(manifest, record, &filters, &cfg)?;
    Ok((Enhanced { filters, output }, energies))
}

fn image_energies(
    manifest: &Manifest,
    record: &ManifestRecord,
    filters: &FilterTensor,
    cfg: &AnalysisConfig,
) -> Result<Option<FilteredEnergies>> {
    let (Some(s), Some(n)) = (&record.speech_image, &record.noise_image) else {
        return Ok(None);
    };
    let spec = |p: &PathBuf| -> Result<MultichannelSpectrogram> {
        let w: MultichannelWaveform = read_wav(&manifest.resolve(p))?;
        Ok(stft_multichannel(&w, cfg)?)
    };
    let (speech_energy, noise_energy) = filtered_energies(filters, &spec(s)?, &spec(n)?)?;
    Ok(Some(FilteredEnergies { speech_energy, noise_energy }))
}

/// Enhances every record of `split` (all records when `None`) into
/// `out/<id>.wav`, with energy sidecars where possible.
pub fn enhance(
    manifest: &Manifest,
    split: Option<wbeam_core::room::Split>,
    method: Method,
    checkpoint: Option<&Path>,
    out: &Path,
) -> Result<usize> {
    let loaded = match (method.needs_checkpoint(), checkpoint) {
        (true, Some(p)) => Some(load_model(p, method)?),
        (true, None) => {
            return Err(CliError::Config(format!("method {} needs --checkpoint", method.as_str())))
        }
        (false, _) => None,
    };
    std::fs::create_dir_all(out).map_err(|e| wbeam_core::Error::Io { path: out.to_path_buf(), source: e })?;
    let mut count = 0;
    for rec in manifest.records.iter().filter(|r| split.map_or(true, |s| r.split == s)) {
        let model = loaded.as_ref().map(|(c, m)| (m, c));
        let (enh, energies) = enhance_record(manifest, rec, method, model)?;
        let wav = out.join(format!("{}.wav", rec.id));
        write_wav_mono(&wav, &enh.output)?;
        if let Some(e) = energies {
            e.write(&FilteredEnergies::sidecar_path(&wav))?;
        }
        log::info!("{}: enhanced with {}", rec.id, method.as_str());
        count += 1;
    }
    EnhanceInfo {
        method: method.as_str().to_string(),
        manifest_config_hash: manifest.config_hash.clone(),
        checkpoint_config_hash: loaded.as_ref().map(|(c, _)| c.meta.config_hash.clone()),
        checkpoint_stage: loaded.as_ref().map(|(c, _)| c.meta.stage.clone()),
    }
    .write(out)?;
    Ok(count)
}
