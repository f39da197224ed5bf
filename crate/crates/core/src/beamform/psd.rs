use num_complex::Complex64;

use super::hermitian::CMatrix;
use super::masks::Mask;
use crate::dsp::MultichannelSpectrogram;
use crate::{Error, Result};

/// One `M × M` cross-power spectral density matrix per frequency bin.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossPsd {
    pub matrices: Vec<CMatrix>,
}

impl CrossPsd {
    pub fn bins(&self) -> usize {
        self.matrices.len()
    }

    pub fn mics(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.n)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            matrices: self.matrices.iter().map(|m| m.scaled(s)).collect(),
        }
    }
}

/// `Φ(f) = 1/T Σ_t r(t,f) x(t,f) x^H(t,f)`.
pub fn masked_cross_psd(spec: &MultichannelSpectrogram, mask: &Mask) -> Result<CrossPsd> {
    let (frames, bins, mics) = spec.shape();
    if (mask.frames, mask.bins) != (frames, bins) {
        return Err(Error::ShapeMismatch(format!(
            "mask is {}x{}, spectrogram is {frames}x{bins}",
            mask.frames, mask.bins
        )));
    }
    let mut acc = vec![Complex64::new(0.0, 0.0); bins * mics * mics];
    for t in 0..frames {
        for f in 0..bins {
            let r = mask.get(t, f);
            if r == 0.0 {
                continue;
            }
            let x = spec.bin(t, f);
            let a = &mut acc[f * mics * mics..(f + 1) * mics * mics];
            for i in 0..mics {
                let xi = x[i] * r;
                for j in 0..mics {
                    a[i * mics + j] += xi * x[j].conj();
                }
            }
        }
    }
    let inv_t = 1.0 / frames.max(1) as f64;
    let matrices = acc
        .chunks_exact(mics * mics)
        .map(|c| {
            let mut m = CMatrix {
                n: mics,
                data: c.iter().map(|v| v * inv_t).collect(),
            };
            // Make the diagonal exactly real.
            for i in 0..mics {
                m[(i, i)].im = 0.0;
            }
            m
        })
        .collect();
    Ok(CrossPsd { matrices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamform::hermitian::hermitian_top_eigen;
    use crate::beamform::masks::MaskKind;
    use crate::dsp::AnalysisConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spec(frames: usize, mics: usize, seed: u64) -> MultichannelSpectrogram {
        let cfg = AnalysisConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..frames * cfg.bins() * mics)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        MultichannelSpectrogram::from_data(frames, mics, data, cfg).unwrap()
    }

    #[test]
    fn single_channel_is_mean_power() {
        let spec = random_spec(5, 1, 1);
        let mask = Mask::constant(5, spec.bins(), 1.0, MaskKind::Speech);
        let psd = masked_cross_psd(&spec, &mask).unwrap();
        for f in [0, 17, 511] {
            let mean: f64 = (0..5).map(|t| spec.get(t, f, 0).norm_sqr()).sum::<f64>() / 5.0;
            assert!((psd.matrices[f][(0, 0)].re - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn single_frame_is_rank_one() {
        let spec = random_spec(1, 4, 2);
        let mask = Mask::constant(1, spec.bins(), 1.0, MaskKind::Speech);
        let psd = masked_cross_psd(&spec, &mask).unwrap();
        for m in psd.matrices.iter().step_by(37) {
            let (top, _) = hermitian_top_eigen(m);
            let tr = m.trace().re;
            // The remaining eigenvalues sum to trace - top.
            assert!((tr - top).abs() <= 1e-10 * tr);
        }
    }

    #[test]
    fn zero_mask_gives_zero_matrices() {
        let spec = random_spec(3, 2, 3);
        let mask = Mask::constant(3, spec.bins(), 0.0, MaskKind::Noise);
        let psd = masked_cross_psd(&spec, &mask).unwrap();
        assert!(psd.matrices.iter().all(|m| m.norm() == 0.0));
    }

    #[test]
    fn hermitian_and_psd() {
        let spec = random_spec(6, 4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let values = (0..6 * spec.bins()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mask = Mask::new(6, spec.bins(), values, MaskKind::Speech).unwrap();
        let psd = masked_cross_psd(&spec, &mask).unwrap();
        for m in &psd.matrices {
            assert!(m.hermitian_defect() <= 1e-12 * m.norm().max(1e-300));
            for _ in 0..4 {
                let v: Vec<Complex64> = (0..4)
                    .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                assert!(m.quad_form(&v) >= -1e-10 * m.trace().re);
            }
        }
    }

    #[test]
    fn shape_mismatch() {
        let spec = random_spec(3, 2, 6);
        let mask = Mask::constant(2, spec.bins(), 1.0, MaskKind::Speech);
        assert!(masked_cross_psd(&spec, &mask).is_err());
    }
}
