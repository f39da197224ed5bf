use num_complex::Complex64;

use super::hermitian::{generalized_top_eigen, CMatrix};
use super::psd::CrossPsd;
use crate::dsp::FilterTensor;
use crate::{Error, Result};

/// Relative diagonal loading applied to the noise PSD.
pub const DEFAULT_LOADING: f64 = 1e-6;

/// Time-invariant beamformer weights `w(f)`, one vector per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticFilter {
    pub weights: Vec<Vec<Complex64>>,
}

impl StaticFilter {
    pub fn bins(&self) -> usize {
        self.weights.len()
    }

    pub fn mics(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// Multiplies `w(f)` by the real gain `g(f)`.
    pub fn with_gains(&self, gains: &[f64]) -> Result<Self> {
        if gains.len() != self.bins() {
            return Err(Error::ShapeMismatch(format!(
                "{} gains for {} bins",
                gains.len(),
                self.bins()
            )));
        }
        Ok(Self {
            weights: self
                .weights
                .iter()
                .zip(gains)
                .map(|(w, g)| w.iter().map(|c| c * *g).collect())
                .collect(),
        })
    }

    /// Broadcasts over `frames` as a filter tensor (which stores `w*`).
    pub fn to_tensor(&self, frames: usize) -> FilterTensor {
        FilterTensor::from_static(&self.weights, frames)
    }
}

/// Unit norm, first non-negligible component real and non-negative.
fn normalise_phase(v: &mut [Complex64]) {
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    let lead = v
        .iter()
        .find(|c| c.norm() > 1e-12 * norm)
        .copied()
        .unwrap_or(Complex64::new(1.0, 0.0));
    let rot = lead.conj() / lead.norm() / norm;
    for c in v.iter_mut() {
        *c *= rot;
    }
    if let Some(c) = v.iter_mut().find(|c| c.norm() > 1e-12) {
        c.im = 0.0;
    }
}

/// Per-bin principal generalized eigenvector of `(Φ_S, Φ_N + δ·tr(Φ_N)/M·I)`.
pub fn gev_weights(phi_s: &CrossPsd, phi_n: &CrossPsd, loading: f64) -> Result<StaticFilter> {
    if phi_s.bins() != phi_n.bins() || phi_s.mics() != phi_n.mics() {
        return Err(Error::ShapeMismatch(format!(
            "speech PSD is {}x{m}x{m}, noise PSD is {}x{n}x{n}",
            phi_s.bins(),
            phi_n.bins(),
            m = phi_s.mics(),
            n = phi_n.mics()
        )));
    }
    if !(loading >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "diagonal loading must be non-negative, got {loading}"
        )));
    }
    let mics = phi_s.mics();
    let mut weights = Vec::with_capacity(phi_s.bins());
    for (f, (a, b)) in phi_s.matrices.iter().zip(&phi_n.matrices).enumerate() {
        let mut b: CMatrix = b.clone();
        b.add_diagonal(loading * b.trace().re / mics as f64);
        let (_, mut v) =
            generalized_top_eigen(a, &b).ok_or(Error::SingularNoise { bin: f, loading })?;
        if v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::SingularNoise { bin: f, loading });
        }
        normalise_phase(&mut v);
        weights.push(v);
    }
    Ok(StaticFilter { weights })
}

/// Blind analytic normalisation gains
/// `g(f) = sqrt(w^H Φ_N Φ_N w / M) / (w^H Φ_N w)`.
pub fn ban_postfilter(filter: &StaticFilter, phi_n: &CrossPsd) -> Result<Vec<f64>> {
    if filter.bins() != phi_n.bins() || filter.mics() != phi_n.mics() {
        return Err(Error::ShapeMismatch(
            "postfilter needs a noise PSD matching the filter".into(),
        ));
    }
    let mics = filter.mics() as f64;
    filter
        .weights
        .iter()
        .zip(&phi_n.matrices)
        .enumerate()
        .map(|(f, (w, phi))| {
            let pw = phi.mul_vec(w);
            let num = pw.iter().map(|c| c.norm_sqr()).sum::<f64>() / mics;
            let den = phi.quad_form(w);
            if !(den > 0.0) || !den.is_finite() {
                return Err(Error::Numerical(format!(
                    "postfilter denominator w^H Phi_N w = {den:e} at bin {f}"
                )));
            }
            Ok(num.sqrt() / den)
        })
        .collect()
}
