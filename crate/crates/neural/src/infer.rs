//! Filter estimation over spectrograms of any length.
//!
//! Inputs are cut into tiles of `tile` frames overlapping by `2 * discard`;
//! each tile keeps only its central frames except at the two ends. Tiles and
//! short inputs are zero-padded up to a multiple of the pooling stride.

use wbeam_core::dsp::{pack_features, FilterTensor, MultichannelSpectrogram};
use wbeam_core::Complex64;

use crate::wnet::{Example, FilterUNet, WNet};
use crate::{NeuralError, ParamStore, Result, Tensor};

pub const TILE_FRAMES: usize = 256;
pub const TILE_DISCARD: usize = 64;

/// Anything that maps an example to a `T × F × 2M` filter tensor.
pub trait FilterEstimator {
    fn mics(&self) -> usize;
    /// Required divisor of `T` and `F`.
    fn stride(&self) -> usize;
    fn filters(&self, store: &ParamStore, ex: &Example) -> Result<Tensor>;
}

impl FilterEstimator for WNet {
    fn mics(&self) -> usize {
        self.mics
    }
    fn stride(&self) -> usize {
        self.unet1.spec.divisor().max(self.unet2.spec.divisor())
    }
    fn filters(&self, store: &ParamStore, ex: &Example) -> Result<Tensor> {
        Ok(self.forward(store, ex, None)?.w)
    }
}

impl FilterEstimator for FilterUNet {
    fn mics(&self) -> usize {
        self.mics
    }
    fn stride(&self) -> usize {
        self.unet.spec.divisor()
    }
    fn filters(&self, store: &ParamStore, ex: &Example) -> Result<Tensor> {
        Ok(self.forward(store, ex)?.w)
    }
}

/// Tile start frames and the `[lo, hi)` range each one contributes.
pub fn tile_plan(frames: usize, tile: usize, discard: usize) -> Vec<(usize, usize, usize)> {
    if frames <= tile {
        return vec![(0, 0, frames)];
    }
    let hop = tile - 2 * discard;
    let mut starts = Vec::new();
    let mut s = 0;
    while s + tile < frames {
        starts.push(s);
        s += hop;
    }
    starts.push(frames - tile);
    let mut plan = Vec::with_capacity(starts.len());
    let mut lo = 0;
    for (i, &s) in starts.iter().enumerate() {
        let hi = if i + 1 == starts.len() { frames } else { s + tile - discard };
        plan.push((s, lo, hi));
        lo = hi;
    }
    plan
}

fn pad_frames(spec: &MultichannelSpectrogram, start: usize, len: usize, padded: usize) -> MultichannelSpectrogram {
    let mut out = MultichannelSpectrogram::zeros(padded, spec.channels(), spec.config);
    let take = len.min(spec.frames() - start);
    let row = spec.bins() * spec.channels();
    out.data_mut()[..take * row].copy_from_slice(&spec.data()[start * row..(start + take) * row]);
    out
}

/// Filters for every frame of `noisy`, tiled when longer than `tile`.
pub fn estimate_filters(
    model: &dyn FilterEstimator,
    store: &ParamStore,
    noisy: &MultichannelSpectrogram,
    tile: usize,
    discard: usize,
) -> Result<FilterTensor> {
    let (t, f, m) = noisy.shape();
    if m != model.mics() {
        return Err(NeuralError::Shape(format!(
            "model expects {} microphones, input has {m}",
            model.mics()
        )));
    }
    let stride = model.stride();
    if f % stride != 0 || tile % stride != 0 || 2 * discard >= tile {
        return Err(NeuralError::Shape(format!(
            "{f} bins / {tile}-frame tiles incompatible with stride {stride}"
        )));
    }
    let mut values = vec![0.0; t * f * 2 * m];
    for (start, lo, hi) in tile_plan(t, tile, discard) {
        let len = tile.min(t);
        let padded = len.div_ceil(stride) * stride;
        let seg = pad_frames(noisy, start, len, padded);
        let ex = Example::new(&pack_features(&seg), &vec![Complex64::new(0.0, 0.0); padded * f])?;
        let w = model.filters(store, &ex)?;
        let row = f * 2 * m;
        values[lo * row..hi * row].copy_from_slice(&w.data[(lo - start) * row..(hi - start) * row]);
    }
    Ok(FilterTensor::new(t, f, m, values)?)
}
