use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// A mono real-valued signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        Self {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Mean squared amplitude.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|x| x * x).sum::<f64>() / self.samples.len() as f64
    }

    pub fn scale(&mut self, gain: f64) {
        self.samples.iter_mut().for_each(|x| *x *= gain);
    }
}

/// `M` equal-length channels captured by an array.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelWaveform {
    channels: Vec<Vec<f64>>,
    sample_rate: u32,
    /// Channel holding the noise-free reference recording, when one exists.
    pub reference_index: Option<usize>,
}

impl MultichannelWaveform {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidArgument("at least one channel is required".into()));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::ShapeMismatch("channels differ in length".into()));
        }
        if channels.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sample".into()));
        }
        Ok(Self {
            channels,
            sample_rate,
            reference_index: None,
        })
    }

    pub fn from_mono(wave: Waveform) -> Self {
        Self {
            sample_rate: wave.sample_rate,
            channels: vec![wave.samples],
            reference_index: None,
        }
    }

    pub fn zeros(channels: usize, len: usize, sample_rate: u32) -> Self {
        Self {
            channels: vec![vec![0.0; len]; channels],
            sample_rate,
            reference_index: None,
        }
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channel_mut(&mut self, m: usize) -> &mut Vec<f64> {
        &mut self.channels[m]
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    pub fn channel(&self, m: usize) -> Waveform {
        Waveform {
            samples: self.channels[m].clone(),
            sample_rate: self.sample_rate,
        }
    }

    /// Zero-pads or truncates every channel to `len` samples.
    pub fn resize(&mut self, len: usize) {
        for c in &mut self.channels {
            c.resize(len, 0.0);
        }
    }

    pub fn scale(&mut self, gain: f64) {
        self.channels
            .iter_mut()
            .flatten()
            .for_each(|x| *x *= gain);
    }

    /// Adds `other` sample by sample; lengths must agree.
    pub fn add_assign(&mut self, other: &MultichannelWaveform) -> Result<()> {
        if other.num_channels() != self.num_channels() || other.len() != self.len() {
            return Err(Error::ShapeMismatch(format!(
                "cannot add {}x{} to {}x{}",
                other.num_channels(),
                other.len(),
                self.num_channels(),
                self.len()
            )));
        }
        for (a, b) in self.channels.iter_mut().zip(&other.channels) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        Ok(())
    }
}

/// Full linear convolution (length `a.len() + b.len() - 1`) via FFT.
pub fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= 32 {
        let mut out = vec![0.0; out_len];
        for (i, &x) in a.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (j, &h) in b.iter().enumerate() {
                out[i + j] += x * h;
            }
        }
        return out;
    }
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut fa: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fa.resize(n, Complex64::new(0.0, 0.0));
    let mut fb: Vec<Complex64> = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fb.resize(n, Complex64::new(0.0, 0.0));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa[..out_len].iter().map(|c| c.re * scale).collect()
}
