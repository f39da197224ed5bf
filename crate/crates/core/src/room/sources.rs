//! Source signals for simulation: synthetic speech-like and noise-like
//! generators, or clips drawn from user-supplied recordings.

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dsp::Waveform;
use crate::io::wav::read_wav_mono_16k;
use crate::Result;

fn normalise(mut x: Vec<f64>) -> Vec<f64> {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v /= rms);
    }
    x
}

/// Cut-off of the high-pass applied to every source signal, Hz.
pub const HIGHPASS_HZ: f64 = 50.0;

/// Second-order Butterworth high-pass (bilinear transform). Microphones
/// roll off below this anyway, and sub-audio energy would otherwise dominate
/// the SNR of brown-ish noise while lying outside the analysed band.
pub fn highpass(x: &[f64], cutoff: f64, fs: u32) -> Vec<f64> {
    let w0 = 2.0 * PI * cutoff / fs as f64;
    let alpha = w0.sin() / std::f64::consts::SQRT_2;
    let cos = w0.cos();
    let a0 = 1.0 + alpha;
    let b = [(1.0 + cos) / 2.0 / a0, -(1.0 + cos) / a0, (1.0 + cos) / 2.0 / a0];
    let a = [-2.0 * cos / a0, (1.0 - alpha) / a0];
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    x.iter()
        .map(|&v| {
            let y = b[0] * v + b[1] * x1 + b[2] * x2 - a[0] * y1 - a[1] * y2;
            (x2, x1, y2, y1) = (x1, v, y1, y);
            y
        })
        .collect()
}

fn finish(x: Vec<f64>, fs: u32) -> Vec<f64> {
    normalise(highpass(&x, HIGHPASS_HZ, fs))
}

/// Raised-cosine attack/release envelope over `len` samples.
fn envelope(len: usize, ramp: usize) -> impl Fn(usize) -> f64 {
    let ramp = ramp.min(len / 2).max(1);
    move |i| {
        if i < ramp {
            0.5 - 0.5 * (PI * i as f64 / ramp as f64).cos()
        } else if i + ramp >= len {
            0.5 - 0.5 * (PI * (len - i) as f64 / ramp as f64).cos()
        } else {
            1.0
        }
    }
}

/// Two-pole resonator gain at `freq` for a formant at `centre` with
/// bandwidth `bw` (all Hz).
fn formant_gain(freq: f64, centre: f64, bw: f64) -> f64 {
    let d = (freq - centre) / (bw / 2.0);
    1.0 / (1.0 + d * d).sqrt()
}

/// Speech-like signal: words of voiced harmonic syllables with moving pitch and
/// formants, occasional fricatives, and pauses. Unit RMS.
pub fn synth_speech(rng: &mut impl Rng, len: usize, fs: u32) -> Waveform {
    let fs_f = fs as f64;
    let mut x = vec![0.0; len];
    let speaker_f0 = rng.gen_range(90.0..240.0);
    let mut pos = rng.gen_range(0..(fs as usize / 5));
    let mut phase = 0.0f64;
    let mut first = true;
    while pos < len {
        if !first && rng.gen_bool(0.3) {
            pos += (rng.gen_range(0.08..0.35) * fs_f) as usize;
            continue;
        }
        first = false;
        let syllables = rng.gen_range(1..=4);
        for _ in 0..syllables {
            if pos >= len {
                break;
            }
            if rng.gen_bool(0.2) {
                // Fricative: high-passed noise burst.
                let dur = (rng.gen_range(0.05..0.14) * fs_f) as usize;
                let env = envelope(dur, dur / 4);
                let gain = rng.gen_range(0.15..0.4);
                let mut prev = 0.0;
                for i in 0..dur.min(len - pos) {
                    let w: f64 = rng.gen_range(-1.0..1.0);
                    x[pos + i] += gain * env(i) * (w - 0.95 * prev);
                    prev = w;
                }
                pos += dur;
                continue;
            }
            let dur = (rng.gen_range(0.12..0.3) * fs_f) as usize;
            let env = envelope(dur, dur / 5);
            let f0_start = speaker_f0 * rng.gen_range(0.85..1.15);
            let f0_end = f0_start * rng.gen_range(0.8..1.2);
            let f1 = (rng.gen_range(300.0..850.0), rng.gen_range(300.0..850.0));
            let f2 = (rng.gen_range(900.0..2300.0), rng.gen_range(900.0..2300.0));
            let f3 = rng.gen_range(2400.0..3300.0);
            let level = rng.gen_range(0.6..1.0);
            let mut gains = Vec::new();
            for i in 0..dur.min(len - pos) {
                let a = i as f64 / dur as f64;
                let f0 = f0_start + (f0_end - f0_start) * a;
                if i % 32 == 0 {
                    // Harmonic amplitudes change slowly; refresh them per chunk.
                    let c1 = f1.0 + (f1.1 - f1.0) * a;
                    let c2 = f2.0 + (f2.1 - f2.0) * a;
                    let harmonics = (5000.0 / f0) as usize;
                    gains.clear();
                    gains.extend((1..=harmonics).map(|h| {
                        let hf = h as f64 * f0;
                        (formant_gain(hf, c1, 90.0)
                            + 0.6 * formant_gain(hf, c2, 140.0)
                            + 0.3 * formant_gain(hf, f3, 200.0))
                            / (h as f64).sqrt()
                    }));
                }
                phase = (phase + 2.0 * PI * f0 / fs_f) % (2.0 * PI);
                let s: f64 = gains
                    .iter()
                    .enumerate()
                    .map(|(h, g)| g * ((h + 1) as f64 * phase).sin())
                    .sum();
                x[pos + i] += level * env(i) * s;
            }
            pos += dur;
        }
        pos += (rng.gen_range(0.03..0.12) * fs_f) as usize;
    }
    Waveform {
        samples: finish(x, fs),
        sample_rate: fs,
    }
}

fn coloured_noise(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    // One-pole smoothing of white noise; pole near 1 gives brown-ish noise,
    // a negative pole tilts energy upwards.
    let pole: f64 = rng.gen_range(-0.5..0.97);
    let mut y = 0.0;
    (0..len)
        .map(|_| {
            y = pole * y + rng.gen_range(-1.0..1.0);
            y
        })
        .collect()
}

/// Environmental-noise-like signal drawn from a handful of families
/// (coloured, modulated, tonal, impulsive, siren). Unit RMS.
pub fn synth_noise(rng: &mut impl Rng, len: usize, fs: u32) -> Waveform {
    let fs_f = fs as f64;
    let x: Vec<f64> = match rng.gen_range(0..5) {
        0 => coloured_noise(rng, len),
        1 => {
            let base = coloured_noise(rng, len);
            let rate = rng.gen_range(0.3..4.0);
            let depth = rng.gen_range(0.3..0.95);
            let ph: f64 = rng.gen_range(0.0..2.0 * PI);
            base.iter()
                .enumerate()
                .map(|(i, v)| v * (1.0 - depth * (0.5 + 0.5 * (2.0 * PI * rate * i as f64 / fs_f + ph).sin())))
                .collect()
        }
        2 => {
            let tones: Vec<(f64, f64, f64)> = (0..rng.gen_range(1..=4))
                .map(|_| {
                    (
                        rng.gen_range(80.0..3500.0),
                        rng.gen_range(0.3..1.0),
                        rng.gen_range(0.0..2.0 * PI),
                    )
                })
                .collect();
            let floor = coloured_noise(rng, len);
            let floor_gain = rng.gen_range(0.02..0.2);
            (0..len)
                .map(|i| {
                    let t = i as f64 / fs_f;
                    tones
                        .iter()
                        .map(|&(f, a, p)| a * (2.0 * PI * f * t + p).sin())
                        .sum::<f64>()
                        + floor_gain * floor[i]
                })
                .collect()
        }
        3 => {
            let mut x = vec![0.0; len];
            let rate = rng.gen_range(2.0..20.0);
            let mut pos = 0usize;
            loop {
                let gap: f64 = -rng.gen_range(1e-3f64..1.0).ln() / rate;
                pos += (gap * fs_f) as usize + 1;
                if pos >= len {
                    break;
                }
                let decay = rng.gen_range(0.002..0.05) * fs_f;
                let amp = rng.gen_range(0.2..1.0);
                for i in 0..((6.0 * decay) as usize).min(len - pos) {
                    x[pos + i] += amp * (-(i as f64) / decay).exp() * rng.gen_range(-1.0..1.0);
                }
            }
            x
        }
        _ => {
            let lo = rng.gen_range(400.0..900.0);
            let hi = lo * rng.gen_range(1.3..2.2);
            let rate = rng.gen_range(0.2..2.0);
            let mut ph = 0.0f64;
            (0..len)
                .map(|i| {
                    let t = i as f64 / fs_f;
                    let f = lo + (hi - lo) * (0.5 + 0.5 * (2.0 * PI * rate * t).sin());
                    ph += 2.0 * PI * f / fs_f;
                    ph.sin() + 0.3 * (2.0 * ph).sin()
                })
                .collect()
        }
    };
    let mut x = finish(x, fs);
    if x.iter().all(|&v| v == 0.0) {
        x = finish(coloured_noise(rng, len), fs);
    }
    Waveform {
        samples: x,
        sample_rate: fs,
    }
}

/// Where source signals come from.
#[derive(Debug, Clone)]
pub enum SourceLibrary {
    Synthetic,
    /// Mono 16 kHz recordings; clips are randomly cropped or zero-padded.
    Recordings {
        speech: Vec<Waveform>,
        noise: Vec<Waveform>,
    },
}

impl SourceLibrary {
    /// Loads every `.wav` file under the two directories.
    pub fn from_dirs(speech_dir: &Path, noise_dir: &Path) -> Result<Self> {
        let load = |dir: &Path| -> Result<Vec<Waveform>> {
            let mut paths: Vec<_> = std::fs::read_dir(dir)
                .map_err(|e| crate::Error::io(dir, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
                .collect();
            paths.sort();
            if paths.is_empty() {
                return Err(crate::Error::InvalidArgument(format!(
                    "no .wav files in {}",
                    dir.display()
                )));
            }
            paths.iter().map(|p| read_wav_mono_16k(p)).collect()
        };
        Ok(SourceLibrary::Recordings {
            speech: load(speech_dir)?,
            noise: load(noise_dir)?,
        })
    }

    fn clip(rng: &mut impl Rng, pool: &[Waveform], len: usize) -> Waveform {
        let src = pool.choose(rng).expect("non-empty pool");
        let mut samples = vec![0.0; len];
        if src.len() > len {
            let off = rng.gen_range(0..=src.len() - len);
            samples.copy_from_slice(&src.samples[off..off + len]);
        } else {
            samples[..src.len()].copy_from_slice(&src.samples);
        }
        Waveform {
            samples: finish(samples, src.sample_rate),
            sample_rate: src.sample_rate,
        }
    }

    pub fn speech(&self, rng: &mut impl Rng, len: usize, fs: u32) -> Waveform {
        match self {
            SourceLibrary::Synthetic => synth_speech(rng, len, fs),
            SourceLibrary::Recordings { speech, .. } => Self::clip(rng, speech, len),
        }
    }

    pub fn noise(&self, rng: &mut impl Rng, len: usize, fs: u32) -> Waveform {
        match self {
            SourceLibrary::Synthetic => synth_noise(rng, len, fs),
            SourceLibrary::Recordings { noise, .. } => Self::clip(rng, noise, len),
        }
    }
}
