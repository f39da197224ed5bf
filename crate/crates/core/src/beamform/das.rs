use std::f64::consts::PI;

use num_complex::Complex64;

use super::gev::StaticFilter;
use crate::dsp::AnalysisConfig;
use crate::room::{array_positions, ArrayGeometry};
use crate::{Error, Result};

/// Far-field delay-and-sum weights `w_m(f) = e^{-j2πfτ_m} / M`, where
/// `τ_m = -(r_m - c)·d / c` is the arrival time at mic `m` relative to the
/// array centre for a plane wave coming from unit direction `d`.
pub fn delay_and_sum(
    geom: &ArrayGeometry,
    look_direction: [f64; 3],
    cfg: &AnalysisConfig,
    sample_rate: u32,
    sound_speed: f64,
) -> Result<StaticFilter> {
    let norm = look_direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "look direction must be a unit vector, norm is {norm}"
        )));
    }
    let mics = array_positions(geom);
    let inv_m = 1.0 / mics.len() as f64;
    let delays: Vec<f64> = mics
        .iter()
        .map(|r| {
            -(0..3)
                .map(|k| (r[k] - geom.center[k]) * look_direction[k])
                .sum::<f64>()
                / sound_speed
        })
        .collect();
    let weights = (0..cfg.bins())
        .map(|f| {
            let hz = cfg.bin_frequency(f, sample_rate);
            delays
                .iter()
                .map(|tau| Complex64::from_polar(inv_m, -2.0 * PI * hz * tau))
                .collect()
        })
        .collect();
    Ok(StaticFilter { weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mic_is_identity() {
        let mut geom = ArrayGeometry::circular6([1.0, 1.0, 1.0]);
        geom.mic_count = 1;
        let w = delay_and_sum(&geom, [1.0, 0.0, 0.0], &AnalysisConfig::default(), 16000, 343.0)
            .unwrap();
        assert!(w
            .weights
            .iter()
            .all(|v| (v[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn reversed_direction_conjugates() {
        let geom = ArrayGeometry::circular6([1.0, 1.0, 1.0]);
        let cfg = AnalysisConfig::default();
        let d = [0.6, 0.8, 0.0];
        let a = delay_and_sum(&geom, d, &cfg, 16000, 343.0).unwrap();
        let b = delay_and_sum(&geom, [-0.6, -0.8, 0.0], &cfg, 16000, 343.0).unwrap();
        for (x, y) in a.weights.iter().flatten().zip(b.weights.iter().flatten()) {
            assert!((x - y.conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn plane_wave_from_look_direction_has_unit_gain() {
        let geom = ArrayGeometry::circular6([0.0, 0.0, 0.0]);
        let cfg = AnalysisConfig::default();
        let d = [0.0, 1.0, 0.0];
        let w = delay_and_sum(&geom, d, &cfg, 16000, 343.0).unwrap();
        let mics = array_positions(&geom);
        for f in [3, 100, 400] {
            let hz = cfg.bin_frequency(f, 16000);
            // Mic m hears s(t - τ_m), τ_m = -r_m·d/c.
            let x: Vec<Complex64> = mics
                .iter()
                .map(|r| {
                    let tau = -(r[1] * d[1]) / 343.0;
                    Complex64::from_polar(1.0, -2.0 * PI * hz * tau)
                })
                .collect();
            let y: Complex64 = w.weights[f].iter().zip(&x).map(|(a, b)| a.conj() * b).sum();
            assert!((y.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_unit_direction() {
        let geom = ArrayGeometry::circular6([0.0; 3]);
        assert!(delay_and_sum(&geom, [1.0, 1.0, 0.0], &AnalysisConfig::default(), 16000, 343.0)
            .is_err());
    }
}
