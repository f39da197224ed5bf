//! Encoder/decoder with concatenative skips.
//!
//! Each encoder level is a run of 3 × 3 conv + ReLU layers followed by 2 × 2
//! average pooling. Each decoder level starts with a 2 × 2 stride-2
//! transposed convolution, optionally followed by 3 × 3 convs at the new
//! resolution; every layer is followed by ReLU except the very last one.
//! Decoder level `k > 0` consumes the previous decoder output concatenated
//! with the pooled output of encoder level `L - 1 - k`, which has the same
//! resolution.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::layers::{
    avgpool2_backward, avgpool2_forward, conv3x3_backward, conv3x3_forward, deconv2x2_backward,
    deconv2x2_forward, relu_backward, relu_forward,
};
use crate::params::{fan_in_uniform, ParamStore};
use crate::tensor::{concat_channels, split_channels};
use crate::{NeuralError, Result, Tensor};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UNetSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    /// Conv output channels per encoder level.
    pub encoder: Vec<Vec<usize>>,
    /// Per decoder level: the transposed-conv output channels, then any
    /// extra conv outputs. The last entry of the last level is the network
    /// output and must equal `out_channels`.
    pub decoder: Vec<Vec<usize>>,
}

/// Kind of a single parameterised layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv3x3,
    Deconv2x2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl LayerShape {
    pub fn weight_shape(&self) -> [usize; 4] {
        let k = match self.kind {
            LayerKind::Conv3x3 => 3,
            LayerKind::Deconv2x2 => 2,
        };
        [k, k, self.in_channels, self.out_channels]
    }

    pub fn param_count(&self) -> usize {
        self.weight_shape().iter().product::<usize>() + self.out_channels
    }

    fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Conv3x3 => 9 * self.in_channels,
            LayerKind::Deconv2x2 => self.in_channels,
        }
    }
}

impl UNetSpec {
    /// Six levels with 16, 32, 64, 128, 256, 512 encoder channels and
    /// 256, 128, 64, 32, 16, `out` decoder channels.
    pub fn paper(in_channels: usize, out_channels: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            encoder: [16, 32, 64, 128, 256, 512].iter().map(|&c| vec![c]).collect(),
            decoder: [256, 128, 64, 32, 16, out_channels]
                .iter()
                .map(|&c| vec![c])
                .collect(),
        }
    }

    /// The single-network comparator: nine encoder convs and nine decoder
    /// layers over the same six resolutions, about 5.46M parameters for
    /// 12 inputs and 12 outputs.
    pub fn single_net(in_channels: usize, out_channels: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            encoder: vec![
                vec![16],
                vec![32, 32],
                vec![64, 64],
                vec![128],
                vec![256],
                vec![512, 512],
            ],
            decoder: vec![
                vec![256, 256],
                vec![128],
                vec![64],
                vec![32, 32],
                vec![16, 16],
                vec![out_channels],
            ],
        }
    }

    /// Divides every hidden channel count by `divisor` (at least 1 channel).
    pub fn narrowed(&self, divisor: usize) -> Self {
        let d = divisor.max(1);
        let last = self.decoder.len().saturating_sub(1);
        Self {
            in_channels: self.in_channels,
            out_channels: self.out_channels,
            encoder: self
                .encoder
                .iter()
                .map(|l| l.iter().map(|c| (c / d).max(1)).collect())
                .collect(),
            decoder: self
                .decoder
                .iter()
                .enumerate()
                .map(|(k, l)| {
                    l.iter()
                        .enumerate()
                        .map(|(i, &c)| {
                            if k == last && i + 1 == l.len() {
                                c
                            } else {
                                (c / d).max(1)
                            }
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn levels(&self) -> usize {
        self.encoder.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NeuralError::Shape(format!("invalid U-Net spec: {m}")));
        if self.encoder.is_empty() || self.encoder.len() != self.decoder.len() {
            return bad("encoder and decoder need the same non-zero number of levels");
        }
        if self
            .encoder
            .iter()
            .chain(&self.decoder)
            .any(|l| l.is_empty() || l.contains(&0))
        {
            return bad("every level needs at least one layer with non-zero width");
        }
        if self.decoder.last().and_then(|l| l.last()) != Some(&self.out_channels) {
            return bad("last decoder layer must produce out_channels");
        }
        if self.in_channels == 0 {
            return bad("no input channels");
        }
        Ok(())
    }

    /// Layer shapes, encoder levels then decoder levels.
    pub fn layer_shapes(&self) -> (Vec<Vec<LayerShape>>, Vec<Vec<LayerShape>>) {
        let mut enc = Vec::new();
        let mut c = self.in_channels;
        for level in &self.encoder {
            let mut shapes = Vec::new();
            for &o in level {
                shapes.push(LayerShape {
                    kind: LayerKind::Conv3x3,
                    in_channels: c,
                    out_channels: o,
                });
                c = o;
            }
            enc.push(shapes);
        }
        let skip: Vec<usize> = self.encoder.iter().map(|l| *l.last().unwrap_or(&0)).collect();
        let levels = self.levels();
        let mut dec = Vec::new();
        for (k, level) in self.decoder.iter().enumerate() {
            if k > 0 {
                c += skip[levels - 1 - k];
            }
            let mut shapes = Vec::new();
            for (i, &o) in level.iter().enumerate() {
                shapes.push(LayerShape {
                    kind: if i == 0 {
                        LayerKind::Deconv2x2
                    } else {
                        LayerKind::Conv3x3
                    },
                    in_channels: c,
                    out_channels: o,
                });
                c = o;
            }
            dec.push(shapes);
        }
        (enc, dec)
    }

    /// Number of weights and biases.
    pub fn param_count(&self) -> usize {
        let (enc, dec) = self.layer_shapes();
        enc.iter().chain(&dec).flatten().map(LayerShape::param_count).sum()
    }

    /// Spatial dimensions must be divisible by this.
    pub fn divisor(&self) -> usize {
        1 << self.levels()
    }

    /// Short stable hash of the architecture.
    pub fn fingerprint(&self) -> String {
        let text = serde_json::to_string(self).expect("spec serialises");
        hex::encode(&Sha256::digest(text.as_bytes())[..8])
    }
}

#[derive(Debug, Clone, Copy)]
struct LayerIds {
    shape: LayerShape,
    w: usize,
    b: usize,
}

/// Cached activations of one forward pass.
#[derive(Debug, Default)]
pub struct UNetTape {
    /// Per layer: input and post-activation output.
    enc: Vec<Vec<(Tensor, Tensor)>>,
    pooled_channels: Vec<usize>,
    dec: Vec<Vec<(Tensor, Tensor)>>,
    filled: bool,
}

impl UNetTape {
    pub fn new() -> Self {
        Self::default()
    }
}

/// A U-Net bound to parameters in a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct UNet {
    pub spec: UNetSpec,
    pub prefix: String,
    enc: Vec<Vec<LayerIds>>,
    dec: Vec<Vec<LayerIds>>,
}

fn layer_name(prefix: &str, part: &str, level: usize, i: usize) -> String {
    format!("{prefix}.{part}{level}.{i}")
}

impl UNet {
    /// Registers freshly initialised parameters under `prefix`.
    pub fn register(
        spec: UNetSpec,
        prefix: &str,
        store: &mut ParamStore,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        spec.validate()?;
        let (enc_s, dec_s) = spec.layer_shapes();
        let mut reg = |part: &str, shapes: &[Vec<LayerShape>]| -> Result<Vec<Vec<LayerIds>>> {
            let mut out = Vec::new();
            for (l, level) in shapes.iter().enumerate() {
                let mut ids = Vec::new();
                for (i, s) in level.iter().enumerate() {
                    let base = layer_name(prefix, part, l, i);
                    let w = store.add(
                        &format!("{base}.w"),
                        fan_in_uniform(&s.weight_shape(), s.fan_in(), rng),
                    )?;
                    let b = store.add(&format!("{base}.b"), Tensor::zeros(&[s.out_channels]))?;
                    ids.push(LayerIds { shape: *s, w, b });
                }
                out.push(ids);
            }
            Ok(out)
        };
        let enc = reg("enc", &enc_s)?;
        let dec = reg("dec", &dec_s)?;
        Ok(Self {
            spec,
            prefix: prefix.to_string(),
            enc,
            dec,
        })
    }

    /// Binds to parameters already present in `store` (e.g. loaded from a
    /// checkpoint), checking their shapes.
    pub fn bind(spec: UNetSpec, prefix: &str, store: &ParamStore) -> Result<Self> {
        spec.validate()?;
        let (enc_s, dec_s) = spec.layer_shapes();
        let find = |part: &str, shapes: &[Vec<LayerShape>]| -> Result<Vec<Vec<LayerIds>>> {
            let mut out = Vec::new();
            for (l, level) in shapes.iter().enumerate() {
                let mut ids = Vec::new();
                for (i, s) in level.iter().enumerate() {
                    let base = layer_name(prefix, part, l, i);
                    let w = store.id(&format!("{base}.w"))?;
                    let b = store.id(&format!("{base}.b"))?;
                    if store.value(w).shape != s.weight_shape()
                        || store.value(b).shape != [s.out_channels]
                    {
                        return Err(NeuralError::Shape(format!(
                            "stored `{base}` does not match the architecture"
                        )));
                    }
                    ids.push(LayerIds { shape: *s, w, b });
                }
                out.push(ids);
            }
            Ok(out)
        };
        Ok(Self {
            enc: find("enc", &enc_s)?,
            dec: find("dec", &dec_s)?,
            spec,
            prefix: prefix.to_string(),
        })
    }

    /// Parameter ids owned by this network.
    pub fn param_ids(&self) -> Vec<usize> {
        self.enc
            .iter()
            .chain(&self.dec)
            .flatten()
            .flat_map(|l| [l.w, l.b])
            .collect()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let (h, w, c) = x.hwc()?;
        let d = self.spec.divisor();
        if c != self.spec.in_channels || h % d != 0 || w % d != 0 || h == 0 || w == 0 {
            return Err(NeuralError::Shape(format!(
                "U-Net expects H x W x {} with H, W divisible by {d}, got {:?}",
                self.spec.in_channels, x.shape
            )));
        }
        Ok(())
    }

    /// Forward pass; fills `tape` when given so that [`UNet::backward`] can
    /// run afterwards.
    pub fn forward(
        &self,
        store: &ParamStore,
        input: &Tensor,
        mut tape: Option<&mut UNetTape>,
    ) -> Result<Tensor> {
        self.check_input(input)?;
        if let Some(t) = tape.as_deref_mut() {
            *t = UNetTape::default();
        }
        let levels = self.spec.levels();
        let mut x = input.clone();
        let mut pooled = Vec::with_capacity(levels);
        for level in &self.enc {
            let mut rec = Vec::new();
            for l in level {
                let y = relu_forward(&conv3x3_forward(&x, store.value(l.w), store.value(l.b))?);
                if tape.is_some() {
                    rec.push((x, y.clone()));
                }
                x = y;
            }
            x = avgpool2_forward(&x)?;
            pooled.push(x.clone());
            if let Some(t) = tape.as_deref_mut() {
                t.enc.push(rec);
                t.pooled_channels.push(x.shape[2]);
            }
        }
        for (k, level) in self.dec.iter().enumerate() {
            if k > 0 {
                x = concat_channels(&x, &pooled[levels - 1 - k])?;
            }
            let mut rec = Vec::new();
            for (i, l) in level.iter().enumerate() {
                let last = k + 1 == levels && i + 1 == level.len();
                let (w, b) = (store.value(l.w), store.value(l.b));
                let mut y = match l.shape.kind {
                    LayerKind::Deconv2x2 => deconv2x2_forward(&x, w, b)?,
                    LayerKind::Conv3x3 => conv3x3_forward(&x, w, b)?,
                };
                if !last {
                    y = relu_forward(&y);
                }
                if tape.is_some() {
                    rec.push((x, y.clone()));
                }
                x = y;
            }
            if let Some(t) = tape.as_deref_mut() {
                t.dec.push(rec);
            }
        }
        if let Some(t) = tape {
            t.filled = true;
        }
        Ok(x)
    }

    /// Back-propagates `grad_out`, accumulating parameter gradients into
    /// `store`. Returns the input gradient when `want_input_grad`.
    pub fn backward(
        &self,
        store: &mut ParamStore,
        tape: &UNetTape,
        grad_out: &Tensor,
        want_input_grad: bool,
    ) -> Result<Option<Tensor>> {
        if !tape.filled {
            return Err(NeuralError::MissingTape);
        }
        let levels = self.spec.levels();
        let mut skip_grads: Vec<Option<Tensor>> = vec![None; levels];
        let mut g = grad_out.clone();
        for k in (0..levels).rev() {
            for (i, l) in self.dec[k].iter().enumerate().rev() {
                let last = k + 1 == levels && i + 1 == self.dec[k].len();
                let (inp, out) = &tape.dec[k][i];
                if !last {
                    g = relu_backward(out, &g)?;
                }
                g = self.layer_backward(store, l, inp, &g, true)?.expect("requested");
            }
            if k > 0 {
                let skip_c = tape.pooled_channels[levels - 1 - k];
                let c = g.shape[2];
                let (prev, skip) = split_channels(&g, c - skip_c)?;
                skip_grads[levels - 1 - k] = Some(skip);
                g = prev;
            }
        }
        for l in (0..levels).rev() {
            if let Some(s) = skip_grads[l].take() {
                g.add_assign(&s)?;
            }
            g = avgpool2_backward(&g)?;
            for (i, layer) in self.enc[l].iter().enumerate().rev() {
                let (inp, out) = &tape.enc[l][i];
                g = relu_backward(out, &g)?;
                let first = l == 0 && i == 0;
                match self.layer_backward(store, layer, inp, &g, !first || want_input_grad)? {
                    Some(dx) => g = dx,
                    None => return Ok(None),
                }
            }
        }
        Ok(Some(g))
    }

    fn layer_backward(
        &self,
        store: &mut ParamStore,
        l: &LayerIds,
        input: &Tensor,
        g: &Tensor,
        want_dx: bool,
    ) -> Result<Option<Tensor>> {
        let w = store.value(l.w).clone();
        let mut dw = std::mem::replace(&mut store.get_mut(l.w).grad, Tensor::zeros(&[0]));
        let mut db = std::mem::replace(&mut store.get_mut(l.b).grad, Tensor::zeros(&[0]));
        let r = match l.shape.kind {
            LayerKind::Conv3x3 => conv3x3_backward(input, &w, g, &mut dw, &mut db, want_dx),
            LayerKind::Deconv2x2 => deconv2x2_backward(input, &w, g, &mut dw, &mut db, want_dx),
        };
        store.get_mut(l.w).grad = dw;
        store.get_mut(l.b).grad = db;
        r
    }
}
