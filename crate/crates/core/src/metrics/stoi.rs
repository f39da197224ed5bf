use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::dsp::resample::resample_rational;
use crate::dsp::Waveform;
use crate::{Error, Result};

const FS: u32 = 10_000;
const FRAME: usize = 256;
const NFFT: usize = 512;
const BANDS: usize = 15;
const MIN_FREQ: f64 = 150.0;
const SEGMENT: usize = 30;
const BETA_DB: f64 = -15.0;
const DYN_RANGE_DB: f64 = 40.0;
const EPS: f64 = f64::EPSILON;

/// `np.hanning(n + 2)[1:-1]`.
fn hanning(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n + 1) as f64).cos())
        .collect()
}

/// Drops frames more than `DYN_RANGE_DB` below the loudest frame of `x` and
/// overlap-adds the survivors of both signals.
fn remove_silent_frames(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hop = FRAME / 2;
    let w = hanning(FRAME);
    let starts: Vec<usize> = (0..=x.len().saturating_sub(FRAME)).step_by(hop).collect();
    let energy: Vec<f64> = starts
        .iter()
        .map(|&s| {
            let e: f64 = (0..FRAME).map(|i| (w[i] * x[s + i]).powi(2)).sum();
            20.0 * (e.sqrt() + EPS).log10()
        })
        .collect();
    let max = energy.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let keep: Vec<usize> = starts
        .iter()
        .zip(&energy)
        .filter(|(_, &e)| max - DYN_RANGE_DB - e < 0.0)
        .map(|(&s, _)| s)
        .collect();
    let len = if keep.is_empty() {
        0
    } else {
        (keep.len() - 1) * hop + FRAME
    };
    let mut xs = vec![0.0; len];
    let mut ys = vec![0.0; len];
    for (k, &s) in keep.iter().enumerate() {
        for i in 0..FRAME {
            xs[k * hop + i] += w[i] * x[s + i];
            ys[k * hop + i] += w[i] * y[s + i];
        }
    }
    (xs, ys)
}

/// Magnitude-squared spectra of Hann-windowed frames, `frames × (NFFT/2+1)`.
fn power_frames(x: &[f64]) -> Vec<Vec<f64>> {
    let hop = FRAME / 2;
    let w = hanning(FRAME);
    let fft = FftPlanner::new().plan_fft_forward(NFFT);
    let mut buf = vec![Complex64::new(0.0, 0.0); NFFT];
    let mut out = Vec::new();
    let mut s = 0;
    while s + FRAME < x.len() {
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for i in 0..FRAME {
            buf[i].re = w[i] * x[s + i];
        }
        fft.process(&mut buf);
        out.push(buf[..=NFFT / 2].iter().map(|c| c.norm_sqr()).collect());
        s += hop;
    }
    out
}

/// One-third octave band edges as FFT-bin ranges.
fn band_ranges() -> Vec<(usize, usize)> {
    let freqs: Vec<f64> = (0..=NFFT / 2)
        .map(|i| i as f64 * FS as f64 / NFFT as f64)
        .collect();
    let nearest = |target: f64| {
        freqs
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    };
    (0..BANDS)
        .map(|k| {
            let lo = MIN_FREQ * 2f64.powf((2.0 * k as f64 - 1.0) / 6.0);
            let hi = MIN_FREQ * 2f64.powf((2.0 * k as f64 + 1.0) / 6.0);
            (nearest(lo), nearest(hi))
        })
        .collect()
}

/// Band envelopes, `bands × frames`.
fn band_envelopes(x: &[f64], ranges: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let spec = power_frames(x);
    ranges
        .iter()
        .map(|&(lo, hi)| {
            spec.iter()
                .map(|fr| fr[lo..hi].iter().sum::<f64>().sqrt())
                .collect()
        })
        .collect()
}

/// Short-time objective intelligibility of `estimate` against the clean
/// `reference`.
pub fn stoi(estimate: &Waveform, reference: &Waveform) -> Result<f64> {
    if estimate.len() != reference.len() || estimate.sample_rate != reference.sample_rate {
        return Err(Error::ShapeMismatch(format!(
            "estimate has {} samples at {} Hz, reference {} at {} Hz",
            estimate.len(),
            estimate.sample_rate,
            reference.len(),
            reference.sample_rate
        )));
    }
    let (x, y) = if reference.sample_rate == FS {
        (reference.samples.clone(), estimate.samples.clone())
    } else {
        let g = gcd(reference.sample_rate, FS);
        let up = (FS / g) as usize;
        let down = (reference.sample_rate / g) as usize;
        (
            resample_rational(&reference.samples, up, down),
            resample_rational(&estimate.samples, up, down),
        )
    };
    let (x, y) = remove_silent_frames(&x, &y);
    let ranges = band_ranges();
    let xb = band_envelopes(&x, &ranges);
    let yb = band_envelopes(&y, &ranges);
    let frames = xb[0].len();
    if frames < SEGMENT {
        return Err(Error::InputTooShort {
            needed: SEGMENT,
            got: frames,
        });
    }
    let clip = 10f64.powf(-BETA_DB / 20.0);
    let mut total = 0.0;
    let mut count = 0usize;
    for end in SEGMENT..=frames {
        for (xr, yr) in xb.iter().zip(&yb) {
            let xs = &xr[end - SEGMENT..end];
            let ys = &yr[end - SEGMENT..end];
            let nx = xs.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ny = ys.iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale = nx / (ny + EPS);
            let yp: Vec<f64> = ys
                .iter()
                .zip(xs)
                .map(|(yv, xv)| (yv * scale).min(xv * (1.0 + clip)))
                .collect();
            let mx = xs.iter().sum::<f64>() / SEGMENT as f64;
            let my = yp.iter().sum::<f64>() / SEGMENT as f64;
            let xc: Vec<f64> = xs.iter().map(|v| v - mx).collect();
            let yc: Vec<f64> = yp.iter().map(|v| v - my).collect();
            let nxc = xc.iter().map(|v| v * v).sum::<f64>().sqrt() + EPS;
            let nyc = yc.iter().map(|v| v * v).sum::<f64>().sqrt() + EPS;
            total += xc.iter().zip(&yc).map(|(a, b)| a * b).sum::<f64>() / (nxc * nyc);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::room::sources::synth_speech;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn speech(len: usize) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        synth_speech(&mut rng, len, 16000)
    }

    #[test]
    fn band_edges_follow_third_octaves() {
        let r = band_ranges();
        assert_eq!(r.len(), 15);
        // 150 Hz * 2^(-1/6) = 133.6 Hz, nearest bin at 19.53 Hz spacing is 7.
        assert_eq!(r[0].0, 7);
        assert!(r.windows(2).all(|w| w[0].1 == w[1].0 || w[0].1 + 1 >= w[1].0));
    }

    #[test]
    fn identical_signals_score_one() {
        let s = speech(48000);
        assert!(stoi(&s, &s).unwrap() > 0.99);
    }

    #[test]
    fn unrelated_noise_scores_low() {
        let s = speech(48000);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = Waveform::new((0..48000).map(|_| rng.gen_range(-0.1..0.1)).collect(), 16000)
            .unwrap();
        let v = stoi(&n, &s).unwrap();
        assert!(v < 0.3, "{v}");
    }

    #[test]
    fn too_short_is_an_error() {
        let s = speech(4000);
        assert!(matches!(stoi(&s, &s), Err(Error::InputTooShort { .. })));
    }
}
