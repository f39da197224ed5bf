use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{cap_db, sdr, snr_from_energies, stoi, DISTORTION_FILTER_LEN};
use crate::dsp::Waveform;
use crate::io::wav::read_wav;
use crate::io::Manifest;
use crate::{Error, Result};

/// Speech and noise energies after beamforming, written next to each
/// enhanced file so the filtered SNR can be computed later.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilteredEnergies {
    pub speech_energy: f64,
    pub noise_energy: f64,
}

impl FilteredEnergies {
    pub fn sidecar_path(wav: &Path) -> std::path::PathBuf {
        wav.with_extension("energies.json")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("energies serialise");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidValue {
            key: path.display().to_string(),
            reason: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceScores {
    pub id: String,
    /// `None` when no speech/noise decomposition was available.
    pub snr_db: Option<f64>,
    pub sdr_db: f64,
    pub stoi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub dataset: String,
    pub utterances: Vec<UtteranceScores>,
    pub mean_snr_db: Option<f64>,
    pub mean_sdr_db: f64,
    pub mean_stoi: f64,
}

impl MetricReport {
    pub fn from_scores(method: &str, dataset: &str, utterances: Vec<UtteranceScores>) -> Result<Self> {
        if utterances.is_empty() {
            return Err(Error::InvalidArgument("no utterances to report".into()));
        }
        let n = utterances.len() as f64;
        let snrs: Vec<f64> = utterances.iter().filter_map(|u| u.snr_db).collect();
        let mean_snr_db = (!snrs.is_empty()).then(|| snrs.iter().sum::<f64>() / snrs.len() as f64);
        Ok(Self {
            method: method.to_string(),
            dataset: dataset.to_string(),
            mean_sdr_db: utterances.iter().map(|u| u.sdr_db).sum::<f64>() / n,
            mean_stoi: utterances.iter().map(|u| u.stoi).sum::<f64>() / n,
            mean_snr_db,
            utterances,
        })
    }

    pub fn table_header() -> &'static str {
        "method\tdataset\tSNR\tSDR\tSTOI\tPESQ"
    }

    /// One tab-separated row; PESQ is left empty.
    pub fn table_row(&self) -> String {
        let snr = self
            .mean_snr_db
            .map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"));
        format!(
            "{}\t{}\t{}\t{:.2}\t{:.3}\t",
            self.method, self.dataset, snr, self.mean_sdr_db, self.mean_stoi
        )
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", Self::table_header());
        let _ = writeln!(s, "{}", self.table_row());
        s
    }
}

/// Scores one enhanced signal against the reference-channel speech.
pub fn score_utterance(
    id: &str,
    estimate: &Waveform,
    reference: &Waveform,
    energies: Option<FilteredEnergies>,
) -> Result<UtteranceScores> {
    // Outputs of frame-based processing may be shorter than the clip.
    let len = estimate.len().min(reference.len());
    let est = Waveform::new(estimate.samples[..len].to_vec(), estimate.sample_rate)?;
    let refw = Waveform::new(reference.samples[..len].to_vec(), reference.sample_rate)?;
    Ok(UtteranceScores {
        id: id.to_string(),
        snr_db: energies.map(|e| cap_db(snr_from_energies(e.speech_energy, e.noise_energy))),
        sdr_db: sdr(&est, &refw, DISTORTION_FILTER_LEN)?,
        stoi: stoi(&est, &refw)?,
    })
}

/// Scores in-memory outputs `(id, estimate, reference, energies)`.
pub fn evaluate_outputs(
    method: &str,
    dataset: &str,
    items: &[(String, Waveform, Waveform, Option<FilteredEnergies>)],
) -> Result<MetricReport> {
    let scores = items
        .iter()
        .map(|(id, e, r, en)| score_utterance(id, e, r, *en))
        .collect::<Result<Vec<_>>>()?;
    MetricReport::from_scores(method, dataset, scores)
}

/// Scores `<outputs>/<id>.wav` for every manifest record, reading the
/// filtered-energy sidecar when present.
pub fn evaluate(manifest: &Manifest, method: &str, outputs: &Path) -> Result<MetricReport> {
    let mut kinds: Vec<&str> = manifest.records.iter().map(|r| r.dataset.as_str()).collect();
    kinds.dedup();
    let dataset = match kinds.as_slice() {
        [one] => one.to_string(),
        _ => "mixed".to_string(),
    };
    let mut scores = Vec::with_capacity(manifest.records.len());
    for rec in &manifest.records {
        let wav = outputs.join(format!("{}.wav", rec.id));
        let estimate = read_wav(&wav)?.channel(0);
        let reference = read_wav(&manifest.resolve(&rec.reference))?.channel(0);
        let side = FilteredEnergies::sidecar_path(&wav);
        let energies = if side.exists() {
            Some(FilteredEnergies::read(&side)?)
        } else {
            None
        };
        scores.push(score_utterance(&rec.id, &estimate, &reference, energies)?);
    }
    MetricReport::from_scores(method, &dataset, scores)
}
