use serde::{Deserialize, Serialize};

use crate::dsp::MultichannelSpectrogram;
use crate::{Error, Result};

/// Linear amplitude ratio above which a bin counts as speech dominated.
pub const DEFAULT_THETA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    Speech,
    Noise,
}

/// Time-frequency weights in `[0, 1]`, laid out `T × F`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub frames: usize,
    pub bins: usize,
    pub values: Vec<f64>,
    pub kind: MaskKind,
}

impl Mask {
    pub fn new(frames: usize, bins: usize, values: Vec<f64>, kind: MaskKind) -> Result<Self> {
        if values.len() != frames * bins {
            return Err(Error::ShapeMismatch(format!(
                "{} mask values for a {frames}x{bins} grid",
                values.len()
            )));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("mask values must lie in [0, 1]".into()));
        }
        Ok(Self {
            frames,
            bins,
            values,
            kind,
        })
    }

    pub fn constant(frames: usize, bins: usize, value: f64, kind: MaskKind) -> Self {
        Self {
            frames,
            bins,
            values: vec![value; frames * bins],
            kind,
        }
    }

    #[inline]
    pub fn get(&self, t: usize, f: usize) -> f64 {
        self.values[t * self.bins + f]
    }

    /// `1 - r` with the opposite kind.
    pub fn complement(&self) -> Self {
        Self {
            frames: self.frames,
            bins: self.bins,
            values: self.values.iter().map(|v| 1.0 - v).collect(),
            kind: match self.kind {
                MaskKind::Speech => MaskKind::Noise,
                MaskKind::Noise => MaskKind::Speech,
            },
        }
    }
}

/// Binary oracle masks from single-channel speech and noise spectrograms:
/// `r_S = 1` where `|S| > θ |N|`, and `r_N = 1 - r_S`.
pub fn oracle_masks(
    clean_ref: &MultichannelSpectrogram,
    noise_ref: &MultichannelSpectrogram,
    theta: f64,
) -> Result<(Mask, Mask)> {
    if clean_ref.shape() != noise_ref.shape() || clean_ref.channels() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "oracle masks need equal single-channel spectrograms, got {:?} and {:?}",
            clean_ref.shape(),
            noise_ref.shape()
        )));
    }
    if !(theta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mask threshold must be positive, got {theta}"
        )));
    }
    let values: Vec<f64> = clean_ref
        .data()
        .iter()
        .zip(noise_ref.data())
        .map(|(s, n)| if s.norm() > theta * n.norm() { 1.0 } else { 0.0 })
        .collect();
    let speech = Mask {
        frames: clean_ref.frames(),
        bins: clean_ref.bins(),
        values,
        kind: MaskKind::Speech,
    };
    let noise = speech.complement();
    Ok((speech, noise))
}
