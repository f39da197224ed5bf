use std::f64::consts::PI;

use num_complex::Complex64;

use super::{AnalysisConfig, MultichannelSpectrogram};
use crate::{Error, Result};

/// Real `T × F × 2M` network input: magnitudes in channels `0..M`, phases
/// (radians, in `(-π, π]`) in channels `M..2M`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub frames: usize,
    pub bins: usize,
    /// Number of microphones `M`; the tensor has `2M` channels.
    pub mics: usize,
    pub values: Vec<f64>,
}

impl FeatureTensor {
    pub fn channels(&self) -> usize {
        2 * self.mics
    }

    #[inline]
    pub fn get(&self, t: usize, f: usize, c: usize) -> f64 {
        self.values[(t * self.bins + f) * 2 * self.mics + c]
    }
}

/// Phase of `c` in `(-π, π]`, with the phase of zero defined as 0.
pub(crate) fn phase(c: Complex64) -> f64 {
    if c.re == 0.0 && c.im == 0.0 {
        return 0.0;
    }
    let p = c.im.atan2(c.re);
    if p <= -PI {
        PI
    } else {
        p
    }
}

pub fn pack_features(spec: &MultichannelSpectrogram) -> FeatureTensor {
    let (frames, bins, mics) = spec.shape();
    let mut values = Vec::with_capacity(frames * bins * 2 * mics);
    for t in 0..frames {
        for f in 0..bins {
            let bin = spec.bin(t, f);
            values.extend(bin.iter().map(|c| c.norm()));
            values.extend(bin.iter().map(|&c| phase(c)));
        }
    }
    FeatureTensor {
        frames,
        bins,
        mics,
        values,
    }
}

/// Rebuilds `mag · e^{j·phase}` coefficients from packed features.
pub fn unpack_features(
    features: &FeatureTensor,
    config: AnalysisConfig,
) -> Result<MultichannelSpectrogram> {
    if features.bins != config.bins() {
        return Err(Error::ShapeMismatch(format!(
            "features have {} bins, configuration expects {}",
            features.bins,
            config.bins()
        )));
    }
    let m = features.mics;
    let data = features
        .values
        .chunks_exact(2 * m)
        .flat_map(|px| (0..m).map(move |i| Complex64::from_polar(px[i], px[m + i])))
        .collect();
    MultichannelSpectrogram::from_data(features.frames, m, data, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(c: Complex64) -> FeatureTensor {
        let cfg = AnalysisConfig::default();
        let mut s = MultichannelSpectrogram::zeros(1, 1, cfg);
        s.set(0, 0, 0, c);
        pack_features(&s)
    }

    #[test]
    fn unit_real_coefficient() {
        let p = single(Complex64::new(1.0, 0.0));
        assert_eq!(p.get(0, 0, 0), 1.0);
        assert_eq!(p.get(0, 0, 1), 0.0);
    }

    #[test]
    fn imaginary_coefficient() {
        let p = single(Complex64::new(0.0, 2.0));
        assert_eq!(p.get(0, 0, 0), 2.0);
        assert!((p.get(0, 0, 1) - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_and_negative_real_axis_phases() {
        assert_eq!(phase(Complex64::new(-0.0, -0.0)), 0.0);
        assert_eq!(phase(Complex64::new(-1.0, -0.0)), PI);
        assert_eq!(phase(Complex64::new(-1.0, 0.0)), PI);
    }

    proptest! {
        #[test]
        fn pack_unpack_roundtrip(
            vals in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 512 * 3)
        ) {
            let cfg = AnalysisConfig::default();
            let data: Vec<Complex64> = vals.iter().map(|&(r, i)| Complex64::new(r, i)).collect();
            let s = MultichannelSpectrogram::from_data(1, 3, data, cfg).unwrap();
            let packed = pack_features(&s);
            for (i, v) in packed.values.iter().enumerate() {
                let c = i % 6;
                if c < 3 {
                    prop_assert!(*v >= 0.0);
                } else {
                    prop_assert!(*v > -PI && *v <= PI);
                }
            }
            let back = unpack_features(&packed, cfg).unwrap();
            for (a, b) in s.data().iter().zip(back.data()) {
                prop_assert!((a - b).norm() < 1e-12);
            }
        }
    }
}
