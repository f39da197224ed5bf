use crate::dsp::{fft_convolve, Waveform};
use crate::{Error, Result};

use super::cap_db;

/// Length of the distortion filter allowed on the reference.
pub const DISTORTION_FILTER_LEN: usize = 512;

/// Cholesky solve of a symmetric positive-definite system, in place.
fn spd_solve(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    true
}

/// Least-squares projection of `estimate` (zero-padded to `N + L - 1`) onto
/// the span of the reference delayed by `0..L` samples.
pub(crate) fn project_onto_delays(estimate: &[f64], reference: &[f64], taps: usize) -> Vec<f64> {
    let n = reference.len();
    let rev: Vec<f64> = reference.iter().rev().copied().collect();
    // corr[n - 1 + k] = Σ_i x[i] r[i - k].
    let auto = fft_convolve(reference, &rev);
    let cross = fft_convolve(estimate, &rev);
    let mut gram = vec![0.0; taps * taps];
    for i in 0..taps {
        for j in 0..taps {
            let lag = i.abs_diff(j);
            gram[i * taps + j] = if lag < n { auto[n - 1 + lag] } else { 0.0 };
        }
    }
    let ridge = 1e-10 * auto[n - 1];
    for i in 0..taps {
        gram[i * taps + i] += ridge;
    }
    let mut h: Vec<f64> = (0..taps)
        .map(|k| cross.get(n - 1 + k).copied().unwrap_or(0.0))
        .collect();
    if !spd_solve(&mut gram, &mut h, taps) {
        h = vec![0.0; taps];
    }
    let mut target = fft_convolve(reference, &h);
    target.resize(n + taps - 1, 0.0);
    target
}

/// Source-to-distortion ratio in dB, clamped to ±60.
pub fn sdr(estimate: &Waveform, reference: &Waveform, taps: usize) -> Result<f64> {
    if estimate.len() != reference.len() {
        return Err(Error::ShapeMismatch(format!(
            "estimate has {} samples, reference {}",
            estimate.len(),
            reference.len()
        )));
    }
    if taps == 0 {
        return Err(Error::InvalidArgument("distortion filter needs taps".into()));
    }
    if reference.samples.iter().all(|&x| x == 0.0) {
        return Err(Error::UndefinedSnr("silent reference".into()));
    }
    let target = project_onto_delays(&estimate.samples, &reference.samples, taps);
    let signal: f64 = target.iter().map(|x| x * x).sum();
    let residual: f64 = target
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let e = estimate.samples.get(i).copied().unwrap_or(0.0);
            (e - t) * (e - t)
        })
        .sum();
    let ratio = if residual <= 0.0 {
        f64::INFINITY
    } else if signal <= 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * (signal / residual).log10()
    };
    Ok(cap_db(ratio))
}
