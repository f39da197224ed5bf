use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{MultichannelWaveform, Waveform};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowKind {
    /// Periodic Hann, constant overlap-add at hop = fft_size / 4.
    PeriodicHann,
    Rectangular,
}

impl WindowKind {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            WindowKind::PeriodicHann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
            WindowKind::Rectangular => vec![1.0; len],
        }
    }
}

/// Framing parameters for the short-time Fourier transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub fft_size: usize,
    pub hop: usize,
    pub window: WindowKind,
    /// Discard bin 0 so that `bins() == fft_size / 2`.
    pub drop_dc: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            fft_size: 1024,
            hop: 256,
            window: WindowKind::PeriodicHann,
            drop_dc: true,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fft_size < 2 || self.fft_size % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "fft_size must be even and at least 2, got {}",
                self.fft_size
            )));
        }
        if self.hop == 0 || self.fft_size % self.hop != 0 {
            return Err(Error::InvalidArgument(format!(
                "hop {} must divide fft_size {}",
                self.hop, self.fft_size
            )));
        }
        Ok(())
    }

    /// Number of stored frequency bins.
    pub fn bins(&self) -> usize {
        self.fft_size / 2 + usize::from(!self.drop_dc)
    }

    /// FFT index of stored bin `f`.
    pub fn fft_index(&self, f: usize) -> usize {
        f + usize::from(self.drop_dc)
    }

    /// Centre frequency in Hz of stored bin `f`.
    pub fn bin_frequency(&self, f: usize, sample_rate: u32) -> f64 {
        self.fft_index(f) as f64 * sample_rate as f64 / self.fft_size as f64
    }

    pub fn frames_for(&self, len: usize) -> usize {
        if len < self.fft_size {
            0
        } else {
            (len - self.fft_size) / self.hop + 1
        }
    }

    /// Signal length covered by `frames` frames.
    pub fn samples_for(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.hop + self.fft_size
        }
    }
}

/// Complex STFT coefficients laid out `T × F × M`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelSpectrogram {
    frames: usize,
    bins: usize,
    channels: usize,
    data: Vec<Complex64>,
    pub config: AnalysisConfig,
}

impl MultichannelSpectrogram {
    pub fn zeros(frames: usize, channels: usize, config: AnalysisConfig) -> Self {
        let bins = config.bins();
        Self {
            frames,
            bins,
            channels,
            data: vec![Complex64::new(0.0, 0.0); frames * bins * channels],
            config,
        }
    }

    pub fn from_data(
        frames: usize,
        channels: usize,
        data: Vec<Complex64>,
        config: AnalysisConfig,
    ) -> Result<Self> {
        let bins = config.bins();
        if frames == 0 || channels == 0 {
            return Err(Error::ShapeMismatch("spectrogram needs T >= 1 and M >= 1".into()));
        }
        if data.len() != frames * bins * channels {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients for a {frames}x{bins}x{channels} spectrogram",
                data.len()
            )));
        }
        Ok(Self {
            frames,
            bins,
            channels,
            data,
            config,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.frames, self.bins, self.channels)
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, t: usize, f: usize, m: usize) -> usize {
        (t * self.bins + f) * self.channels + m
    }

    #[inline]
    pub fn get(&self, t: usize, f: usize, m: usize) -> Complex64 {
        self.data[self.index(t, f, m)]
    }

    #[inline]
    pub fn set(&mut self, t: usize, f: usize, m: usize, v: Complex64) {
        let i = self.index(t, f, m);
        self.data[i] = v;
    }

    /// The `M` coefficients of bin `(t, f)`.
    #[inline]
    pub fn bin(&self, t: usize, f: usize) -> &[Complex64] {
        let start = (t * self.bins + f) * self.channels;
        &self.data[start..start + self.channels]
    }

    /// Single-channel spectrogram holding channel `m`.
    pub fn channel(&self, m: usize) -> MultichannelSpectrogram {
        let data = (0..self.frames * self.bins)
            .map(|i| self.data[i * self.channels + m])
            .collect();
        Self {
            frames: self.frames,
            bins: self.bins,
            channels: 1,
            data,
            config: self.config,
        }
    }

    /// Frames `[start, start + len)` as a new spectrogram, zero-filled past the end.
    pub fn frame_slice(&self, start: usize, len: usize) -> MultichannelSpectrogram {
        let mut out = Self::zeros(len, self.channels, self.config);
        let stride = self.bins * self.channels;
        for t in 0..len {
            let src = start + t;
            if src >= self.frames {
                break;
            }
            out.data[t * stride..(t + 1) * stride]
                .copy_from_slice(&self.data[src * stride..(src + 1) * stride]);
        }
        out
    }

    /// Sum of squared magnitudes over all coefficients.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }
}

struct Framer {
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl Framer {
    fn new(cfg: &AnalysisConfig, inverse: bool) -> Self {
        let mut planner = FftPlanner::new();
        let fft = if inverse {
            planner.plan_fft_inverse(cfg.fft_size)
        } else {
            planner.plan_fft_forward(cfg.fft_size)
        };
        Self {
            window: cfg.window.coefficients(cfg.fft_size),
            fft,
        }
    }
}

fn analyse_channel(
    samples: &[f64],
    cfg: &AnalysisConfig,
    framer: &Framer,
    out: &mut MultichannelSpectrogram,
    m: usize,
) {
    let n = cfg.fft_size;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for t in 0..out.frames {
        let frame = &samples[t * cfg.hop..t * cfg.hop + n];
        for ((b, &x), &w) in buf.iter_mut().zip(frame).zip(&framer.window) {
            *b = Complex64::new(x * w, 0.0);
        }
        framer.fft.process(&mut buf);
        for f in 0..out.bins {
            out.set(t, f, m, buf[cfg.fft_index(f)]);
        }
    }
}

/// Short-time Fourier transform of a mono waveform.
///
/// Frames start at multiples of `hop` with no padding, so a signal of length
/// `len` yields `(len - fft_size) / hop + 1` frames.
pub fn stft(wave: &Waveform, cfg: &AnalysisConfig) -> Result<MultichannelSpectrogram> {
    cfg.validate()?;
    if wave.len() < cfg.fft_size {
        return Err(Error::InputTooShort {
            needed: cfg.fft_size,
            got: wave.len(),
        });
    }
    let mut out = MultichannelSpectrogram::zeros(cfg.frames_for(wave.len()), 1, *cfg);
    analyse_channel(&wave.samples, cfg, &Framer::new(cfg, false), &mut out, 0);
    Ok(out)
}

/// STFT of every channel of an array recording.
pub fn stft_multichannel(
    wave: &MultichannelWaveform,
    cfg: &AnalysisConfig,
) -> Result<MultichannelSpectrogram> {
    cfg.validate()?;
    if wave.len() < cfg.fft_size {
        return Err(Error::InputTooShort {
            needed: cfg.fft_size,
            got: wave.len(),
        });
    }
    let framer = Framer::new(cfg, false);
    let mut out =
        MultichannelSpectrogram::zeros(cfg.frames_for(wave.len()), wave.num_channels(), *cfg);
    for (m, ch) in wave.channels().iter().enumerate() {
        analyse_channel(ch, cfg, &framer, &mut out, m);
    }
    Ok(out)
}

/// Weighted overlap-add inverse of [`stft`].
///
/// Each frame is inverted, multiplied by the analysis window and accumulated;
/// the sum is divided by the accumulated squared window. A dropped DC bin is
/// restored as zero.
pub fn istft(spec: &MultichannelSpectrogram, cfg: &AnalysisConfig) -> Result<Waveform> {
    cfg.validate()?;
    if spec.config != *cfg {
        return Err(Error::ConfigMismatch(format!(
            "spectrogram was produced with {:?}, synthesis requested with {:?}",
            spec.config, cfg
        )));
    }
    if spec.channels != 1 {
        return Err(Error::ShapeMismatch(format!(
            "istft expects a single channel, got {}",
            spec.channels
        )));
    }
    let n = cfg.fft_size;
    let framer = Framer::new(cfg, true);
    let len = cfg.samples_for(spec.frames);
    let mut out = vec![0.0; len];
    let mut norm = vec![0.0; len];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let scale = 1.0 / n as f64;
    for t in 0..spec.frames {
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for f in 0..spec.bins {
            let k = cfg.fft_index(f);
            let c = spec.get(t, f, 0);
            buf[k] = c;
            if k != 0 && k != n / 2 {
                buf[n - k] = c.conj();
            }
        }
        // The Nyquist and DC bins of a real signal are real.
        buf[0].im = 0.0;
        buf[n / 2].im = 0.0;
        framer.fft.process(&mut buf);
        let start = t * cfg.hop;
        for (i, (&w, b)) in framer.window.iter().zip(&buf).enumerate() {
            out[start + i] += b.re * scale * w;
            norm[start + i] += w * w;
        }
    }
    for (x, &d) in out.iter_mut().zip(&norm) {
        if d > 1e-10 {
            *x /= d;
        } else {
            *x = 0.0;
        }
    }
    Waveform::new(out, crate::dsp::DEFAULT_SAMPLE_RATE)
}
