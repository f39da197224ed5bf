use crate::{NeuralError, Result};

/// Dense row-major `f64` tensor. Images are stored height × width ×
/// channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(NeuralError::Shape(format!(
                "{} values for shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], v: f64) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![v; shape.iter().product()],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `(height, width, channels)` of a rank-3 image tensor.
    pub fn hwc(&self) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [h, w, c] => Ok((h, w, c)),
            _ => Err(NeuralError::Shape(format!(
                "expected an H x W x C tensor, got {:?}",
                self.shape
            ))),
        }
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(NeuralError::Shape(format!(
                "cannot add {:?} to {:?}",
                other.shape, self.shape
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Concatenates two H × W images along channels.
pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (h, w, ca) = a.hwc()?;
    let (hb, wb, cb) = b.hwc()?;
    if (h, w) != (hb, wb) {
        return Err(NeuralError::Shape(format!(
            "cannot concatenate {:?} and {:?}",
            a.shape, b.shape
        )));
    }
    let mut data = Vec::with_capacity(h * w * (ca + cb));
    for p in 0..h * w {
        data.extend_from_slice(&a.data[p * ca..(p + 1) * ca]);
        data.extend_from_slice(&b.data[p * cb..(p + 1) * cb]);
    }
    Ok(Tensor {
        shape: vec![h, w, ca + cb],
        data,
    })
}

/// Inverse of [`concat_channels`]: the first `ca` channels and the rest.
pub fn split_channels(x: &Tensor, ca: usize) -> Result<(Tensor, Tensor)> {
    let (h, w, c) = x.hwc()?;
    if ca > c {
        return Err(NeuralError::Shape(format!("cannot split {ca} of {c} channels")));
    }
    let cb = c - ca;
    let mut a = Vec::with_capacity(h * w * ca);
    let mut b = Vec::with_capacity(h * w * cb);
    for px in x.data.chunks_exact(c) {
        a.extend_from_slice(&px[..ca]);
        b.extend_from_slice(&px[ca..]);
    }
    Ok((
        Tensor {
            shape: vec![h, w, ca],
            data: a,
        },
        Tensor {
            shape: vec![h, w, cb],
            data: b,
        },
    ))
}
