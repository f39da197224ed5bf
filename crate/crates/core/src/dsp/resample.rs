//! Windowed-sinc sample-rate conversion.

use std::f64::consts::PI;

use super::Waveform;
use crate::{Error, Result};

pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Linear-phase Blackman-windowed low-pass FIR with `taps` coefficients
/// (odd) and cutoff `cutoff` in cycles per sample (0 < cutoff < 0.5).
pub fn lowpass(taps: usize, cutoff: f64) -> Vec<f64> {
    let centre = (taps - 1) as f64 / 2.0;
    let denom = (taps - 1).max(1) as f64;
    (0..taps)
        .map(|n| {
            let x = n as f64 - centre;
            let w = 0.42 - 0.5 * (2.0 * PI * n as f64 / denom).cos()
                + 0.08 * (4.0 * PI * n as f64 / denom).cos();
            2.0 * cutoff * sinc(2.0 * cutoff * x) * w
        })
        .collect()
}

/// Rational resampling by `up / down` with a zero-delay polyphase filter.
pub fn resample_rational(x: &[f64], up: usize, down: usize) -> Vec<f64> {
    if up == down {
        return x.to_vec();
    }
    let cutoff = 0.5 / up.max(down) as f64;
    let half = 10 * up.max(down);
    let h = lowpass(2 * half + 1, cutoff * 0.95);
    let out_len = (x.len() * up).div_ceil(down);
    let mut y = vec![0.0; out_len];
    for (k, yk) in y.iter_mut().enumerate() {
        // Upsampled-domain time of output k, filter centred there.
        let t = (k * down) as isize;
        let lo = (t - half as isize).max(0);
        let hi = t + half as isize;
        // Input samples sit at multiples of `up`.
        let n_lo = (lo as usize).div_ceil(up);
        let n_hi = ((hi.max(0) as usize) / up).min(x.len().saturating_sub(1));
        let mut acc = 0.0;
        for n in n_lo..=n_hi {
            let idx = (n * up) as isize - t + half as isize;
            if idx >= 0 && (idx as usize) < h.len() {
                acc += x[n] * h[idx as usize];
            }
        }
        *yk = acc * up as f64;
    }
    y
}

/// Integer-factor decimation with anti-alias filtering.
pub fn decimate(wave: &Waveform, factor: usize) -> Result<Waveform> {
    if factor == 0 || wave.sample_rate as usize % factor != 0 {
        return Err(Error::InvalidArgument(format!(
            "cannot decimate {} Hz by {factor}",
            wave.sample_rate
        )));
    }
    Waveform::new(
        resample_rational(&wave.samples, 1, factor),
        wave.sample_rate / factor as u32,
    )
}
