use num_complex::Complex64;

use super::MultichannelSpectrogram;
use crate::{Error, Result};

/// Time-varying filter-and-sum weights laid out `T × F × 2M`.
///
/// Channel `m` holds the real part and channel `M + m` the imaginary part of
/// the *conjugated* weight `W*_m(t, f)`, i.e. the factor multiplied directly
/// against `X_m(t, f)`. No further conjugation happens when the filter is
/// applied.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterTensor {
    pub frames: usize,
    pub bins: usize,
    pub mics: usize,
    pub values: Vec<f64>,
}

impl FilterTensor {
    pub fn new(frames: usize, bins: usize, mics: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != frames * bins * 2 * mics {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {frames}x{bins}x{} filter tensor",
                values.len(),
                2 * mics
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite filter weight".into()));
        }
        Ok(Self {
            frames,
            bins,
            mics,
            values,
        })
    }

    /// Selects channel `reference` unchanged.
    pub fn identity(frames: usize, bins: usize, mics: usize, reference: usize) -> Self {
        let mut values = vec![0.0; frames * bins * 2 * mics];
        for px in values.chunks_exact_mut(2 * mics) {
            px[reference] = 1.0;
        }
        Self {
            frames,
            bins,
            mics,
            values,
        }
    }

    /// Broadcasts per-frequency weights `w(f)` over `frames`, storing `w*`.
    pub fn from_static(weights: &[Vec<Complex64>], frames: usize) -> Self {
        let bins = weights.len();
        let mics = weights.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(frames * bins * 2 * mics);
        for _ in 0..frames {
            for w in weights {
                values.extend(w.iter().map(|c| c.re));
                values.extend(w.iter().map(|c| -c.im));
            }
        }
        Self {
            frames,
            bins,
            mics,
            values,
        }
    }

    /// `W*_m(t, f)`.
    #[inline]
    pub fn conj_weight(&self, t: usize, f: usize, m: usize) -> Complex64 {
        let base = (t * self.bins + f) * 2 * self.mics;
        Complex64::new(self.values[base + m], self.values[base + self.mics + m])
    }
}

/// `Ŝ(t,f) = Σ_m W*_m(t,f) · X_m(t,f)`.
pub fn apply_filters(
    filters: &FilterTensor,
    spec: &MultichannelSpectrogram,
) -> Result<MultichannelSpectrogram> {
    let (frames, bins, mics) = spec.shape();
    if (filters.frames, filters.bins, filters.mics) != (frames, bins, mics) {
        return Err(Error::ShapeMismatch(format!(
            "filters are {}x{}x{}, spectrogram is {frames}x{bins}x{mics}",
            filters.frames, filters.bins, filters.mics
        )));
    }
    let mut out = MultichannelSpectrogram::zeros(frames, 1, spec.config);
    let w = &filters.values;
    let x = spec.data();
    let y = out.data_mut();
    for (p, yp) in y.iter_mut().enumerate() {
        let wp = &w[p * 2 * mics..(p + 1) * 2 * mics];
        let xp = &x[p * mics..(p + 1) * mics];
        let mut acc = Complex64::new(0.0, 0.0);
        for m in 0..mics {
            acc += Complex64::new(wp[m], wp[mics + m]) * xp[m];
        }
        *yp = acc;
    }
    Ok(out)
}
