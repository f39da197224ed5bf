//! Two chained U-Nets: a reference-magnitude estimator feeding a
//! time-frequency filter estimator; and the single-network comparator.

use rand::Rng;
use wbeam_core::dsp::{FeatureTensor, FilterTensor, MultichannelSpectrogram};
use wbeam_core::Complex64;

use crate::loss::{apply_filter, apply_filter_backward, loss_l1, loss_l2};
use crate::tensor::{concat_channels, split_channels};
use crate::unet::{UNet, UNetSpec, UNetTape};
use crate::{NeuralError, ParamStore, Result, Tensor};

pub const UNET1_PREFIX: &str = "unet1";
pub const UNET2_PREFIX: &str = "unet2";
pub const UNETB_PREFIX: &str = "unetb";

/// One training or evaluation segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    /// `T × F × 2M` magnitudes and phases.
    pub features: Tensor,
    /// Noisy coefficients rebuilt from `features`, `T × F × M`.
    pub noisy: Vec<Complex64>,
    /// Reference-channel clean speech `S_R`, `T × F`.
    pub reference: Vec<Complex64>,
    pub mics: usize,
}

impl Example {
    pub fn new(features: &FeatureTensor, reference: &[Complex64]) -> Result<Self> {
        let (t, f, m) = (features.frames, features.bins, features.mics);
        if reference.len() != t * f {
            return Err(NeuralError::Shape(format!(
                "reference has {} bins for a {t}x{f} grid",
                reference.len()
            )));
        }
        let noisy = features
            .values
            .chunks_exact(2 * m)
            .flat_map(|px| (0..m).map(move |i| Complex64::from_polar(px[i], px[m + i])))
            .collect();
        Ok(Self {
            features: Tensor::new(vec![t, f, 2 * m], features.values.clone())?,
            noisy,
            reference: reference.to_vec(),
            mics: m,
        })
    }

    pub fn from_spectrograms(
        noisy: &MultichannelSpectrogram,
        reference: &MultichannelSpectrogram,
    ) -> Result<Self> {
        if reference.channels() != 1 || reference.frames() != noisy.frames() {
            return Err(NeuralError::Shape(
                "reference must be one channel on the noisy grid".into(),
            ));
        }
        Self::new(&wbeam_core::dsp::pack_features(noisy), reference.data())
    }

    pub fn frames(&self) -> usize {
        self.features.shape[0]
    }

    pub fn bins(&self) -> usize {
        self.features.shape[1]
    }

    /// `|S_R|` as a `T × F × 1` tensor.
    pub fn reference_magnitude(&self) -> Tensor {
        Tensor {
            shape: vec![self.frames(), self.bins(), 1],
            data: self.reference.iter().map(|c| c.norm()).collect(),
        }
    }
}

/// Which loss a step optimises and through which path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Magnitude loss on the first network's output.
    Magnitude,
    /// Filter loss on the second network fed with the true `|S_R|`.
    FilterOracle,
    /// Filter loss through both networks.
    Joint,
}

#[derive(Debug, Clone)]
pub struct WNetOutput {
    pub y: Tensor,
    /// `T × F × 2M` filter tensor (conjugated weights, real parts first).
    pub w: Tensor,
    pub estimate: Vec<Complex64>,
}

impl WNetOutput {
    pub fn filters(&self, mics: usize) -> Result<FilterTensor> {
        let (t, f, _) = self.w.hwc()?;
        Ok(FilterTensor::new(t, f, mics, self.w.data.clone())?)
    }
}

#[derive(Debug, Clone)]
pub struct WNet {
    pub unet1: UNet,
    pub unet2: UNet,
    pub mics: usize,
}

/// Architectures of the two networks for `mics` microphones, with hidden
/// widths divided by `width_divisor`.
pub fn wnet_specs(mics: usize, width_divisor: usize) -> (UNetSpec, UNetSpec) {
    (
        UNetSpec::paper(2 * mics, 1).narrowed(width_divisor),
        UNetSpec::paper(2 * mics + 1, 2 * mics).narrowed(width_divisor),
    )
}

impl WNet {
    pub fn register(
        mics: usize,
        width_divisor: usize,
        store: &mut ParamStore,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let (s1, s2) = wnet_specs(mics, width_divisor);
        Ok(Self {
            unet1: UNet::register(s1, UNET1_PREFIX, store, rng)?,
            unet2: UNet::register(s2, UNET2_PREFIX, store, rng)?,
            mics,
        })
    }

    pub fn bind(spec1: UNetSpec, spec2: UNetSpec, store: &ParamStore) -> Result<Self> {
        let mics = spec2.out_channels / 2;
        if spec1.in_channels != 2 * mics || spec2.in_channels != 2 * mics + 1 {
            return Err(NeuralError::Shape("inconsistent W-Net channel counts".into()));
        }
        Ok(Self {
            unet1: UNet::bind(spec1, UNET1_PREFIX, store)?,
            unet2: UNet::bind(spec2, UNET2_PREFIX, store)?,
            mics,
        })
    }

    pub fn param_count(&self) -> usize {
        self.unet1.spec.param_count() + self.unet2.spec.param_count()
    }

    /// `Y = UNET1(X)`, `Z = [X, Y]`, `W = UNET2(Z)`, `Ŝ = Σ W* X`. When
    /// `y_override` is given it replaces `Y` in `Z`.
    pub fn forward(
        &self,
        store: &ParamStore,
        ex: &Example,
        y_override: Option<&Tensor>,
    ) -> Result<WNetOutput> {
        let y = match y_override {
            Some(y) => y.clone(),
            None => self.unet1.forward(store, &ex.features, None)?,
        };
        let z = concat_channels(&ex.features, &y)?;
        let w = self.unet2.forward(store, &z, None)?;
        let estimate = apply_filter(&w, &ex.noisy, self.mics)?;
        Ok(WNetOutput { y, w, estimate })
    }

    /// Loss without gradients.
    pub fn loss(&self, store: &ParamStore, ex: &Example, objective: Objective) -> Result<f64> {
        match objective {
            Objective::Magnitude => {
                let y = self.unet1.forward(store, &ex.features, None)?;
                Ok(loss_l1(&y, &ex.reference_magnitude().data)?.0)
            }
            Objective::FilterOracle => {
                let out = self.forward(store, ex, Some(&ex.reference_magnitude()))?;
                Ok(loss_l2(&out.estimate, &ex.reference)?.0)
            }
            Objective::Joint => {
                let out = self.forward(store, ex, None)?;
                Ok(loss_l2(&out.estimate, &ex.reference)?.0)
            }
        }
    }

    /// Loss with gradients accumulated into `store`. Only the parameters the
    /// objective depends on receive gradient.
    pub fn loss_and_backward(
        &self,
        store: &mut ParamStore,
        ex: &Example,
        objective: Objective,
    ) -> Result<f64> {
        let (t, f) = (ex.frames(), ex.bins());
        let mut tape1 = UNetTape::new();
        if objective == Objective::Magnitude {
            let y = self.unet1.forward(store, &ex.features, Some(&mut tape1))?;
            let (l, g) = loss_l1(&y, &ex.reference_magnitude().data)?;
            self.unet1.backward(store, &tape1, &g, false)?;
            return Ok(l);
        }
        let y = if objective == Objective::Joint {
            self.unet1.forward(store, &ex.features, Some(&mut tape1))?
        } else {
            ex.reference_magnitude()
        };
        let z = concat_channels(&ex.features, &y)?;
        let mut tape2 = UNetTape::new();
        let w = self.unet2.forward(store, &z, Some(&mut tape2))?;
        let estimate = apply_filter(&w, &ex.noisy, self.mics)?;
        let (l, gs) = loss_l2(&estimate, &ex.reference)?;
        let gw = apply_filter_backward(&gs, &ex.noisy, t, f, self.mics)?;
        let joint = objective == Objective::Joint;
        let gz = self.unet2.backward(store, &tape2, &gw, joint)?;
        if let (true, Some(gz)) = (joint, gz) {
            let (_, gy) = split_channels(&gz, 2 * self.mics)?;
            self.unet1.backward(store, &tape1, &gy, false)?;
        }
        Ok(l)
    }
}

/// Single U-Net mapping the features straight to filters.
#[derive(Debug, Clone)]
pub struct FilterUNet {
    pub unet: UNet,
    pub mics: usize,
}

impl FilterUNet {
    pub fn register(
        mics: usize,
        width_divisor: usize,
        store: &mut ParamStore,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let spec = UNetSpec::single_net(2 * mics, 2 * mics).narrowed(width_divisor);
        Ok(Self {
            unet: UNet::register(spec, UNETB_PREFIX, store, rng)?,
            mics,
        })
    }

    pub fn bind(spec: UNetSpec, store: &ParamStore) -> Result<Self> {
        let mics = spec.out_channels / 2;
        Ok(Self {
            unet: UNet::bind(spec, UNETB_PREFIX, store)?,
            mics,
        })
    }

    pub fn forward(&self, store: &ParamStore, ex: &Example) -> Result<WNetOutput> {
        let w = self.unet.forward(store, &ex.features, None)?;
        let estimate = apply_filter(&w, &ex.noisy, self.mics)?;
        Ok(WNetOutput {
            y: Tensor::zeros(&[0]),
            w,
            estimate,
        })
    }

    pub fn loss(&self, store: &ParamStore, ex: &Example) -> Result<f64> {
        Ok(loss_l2(&self.forward(store, ex)?.estimate, &ex.reference)?.0)
    }

    pub fn loss_and_backward(&self, store: &mut ParamStore, ex: &Example) -> Result<f64> {
        let mut tape = UNetTape::new();
        let w = self.unet.forward(store, &ex.features, Some(&mut tape))?;
        let estimate = apply_filter(&w, &ex.noisy, self.mics)?;
        let (l, gs) = loss_l2(&estimate, &ex.reference)?;
        let gw = apply_filter_backward(&gs, &ex.noisy, ex.frames(), ex.bins(), self.mics)?;
        self.unet.backward(store, &tape, &gw, false)?;
        Ok(l)
    }
}
