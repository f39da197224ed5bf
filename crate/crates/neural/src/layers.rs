//! Forward and backward passes of the network building blocks.
//!
//! Images are `H × W × C`. Convolution weights are `3 × 3 × Cin × Cout`,
//! transposed-convolution weights `2 × 2 × Cin × Cout`.

use crate::gemm::gemm;
use crate::{NeuralError, Result, Tensor};

/// Upper bound on the im2col buffer, in values.
const PATCH_BUDGET: usize = 1 << 20;

fn check_conv(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<(usize, usize, usize, usize)> {
    let (h, wd, cin) = x.hwc()?;
    if w.shape.len() != 4 || w.shape[0] != 3 || w.shape[1] != 3 || w.shape[2] != cin {
        return Err(NeuralError::Shape(format!(
            "conv3x3 weights {:?} do not fit input {:?}",
            w.shape, x.shape
        )));
    }
    let cout = w.shape[3];
    if b.shape != [cout] {
        return Err(NeuralError::Shape(format!(
            "conv3x3 bias {:?} for {cout} outputs",
            b.shape
        )));
    }
    Ok((h, wd, cin, cout))
}

fn rows_per_chunk(wd: usize, cin: usize) -> usize {
    (PATCH_BUDGET / (wd * 9 * cin).max(1)).max(1)
}

/// Patch matrix for output rows `r0..r1`: row `(i, j)` holds
/// `x[i+ky-1, j+kx-1, c]` at column `(ky·3 + kx)·Cin + c`.
fn im2col(x: &[f64], h: usize, wd: usize, cin: usize, r0: usize, r1: usize, out: &mut [f64]) {
    let k = 9 * cin;
    for i in r0..r1 {
        for j in 0..wd {
            let row = &mut out[((i - r0) * wd + j) * k..((i - r0) * wd + j + 1) * k];
            for ky in 0..3 {
                let ii = i as isize + ky as isize - 1;
                for kx in 0..3 {
                    let jj = j as isize + kx as isize - 1;
                    let dst = &mut row[(ky * 3 + kx) * cin..(ky * 3 + kx + 1) * cin];
                    if ii < 0 || jj < 0 || ii >= h as isize || jj >= wd as isize {
                        dst.fill(0.0);
                    } else {
                        let s = (ii as usize * wd + jj as usize) * cin;
                        dst.copy_from_slice(&x[s..s + cin]);
                    }
                }
            }
        }
    }
}

fn col2im_add(dp: &[f64], h: usize, wd: usize, cin: usize, r0: usize, r1: usize, dx: &mut [f64]) {
    let k = 9 * cin;
    for i in r0..r1 {
        for j in 0..wd {
            let row = &dp[((i - r0) * wd + j) * k..((i - r0) * wd + j + 1) * k];
            for ky in 0..3 {
                let ii = i as isize + ky as isize - 1;
                if ii < 0 || ii >= h as isize {
                    continue;
                }
                for kx in 0..3 {
                    let jj = j as isize + kx as isize - 1;
                    if jj < 0 || jj >= wd as isize {
                        continue;
                    }
                    let s = (ii as usize * wd + jj as usize) * cin;
                    let src = &row[(ky * 3 + kx) * cin..(ky * 3 + kx + 1) * cin];
                    for (d, v) in dx[s..s + cin].iter_mut().zip(src) {
                        *d += v;
                    }
                }
            }
        }
    }
}

/// 3 × 3 convolution, stride 1, zero "same" padding.
pub fn conv3x3_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (h, wd, cin, cout) = check_conv(x, w, b)?;
    let mut y = Tensor::zeros(&[h, wd, cout]);
    for px in y.data.chunks_exact_mut(cout) {
        px.copy_from_slice(&b.data);
    }
    let rows = rows_per_chunk(wd, cin);
    let mut patches = vec![0.0; rows.min(h) * wd * 9 * cin];
    let mut r0 = 0;
    while r0 < h {
        let r1 = (r0 + rows).min(h);
        let m = (r1 - r0) * wd;
        im2col(&x.data, h, wd, cin, r0, r1, &mut patches);
        gemm(
            m,
            9 * cin,
            cout,
            1.0,
            &patches,
            false,
            &w.data,
            false,
            1.0,
            &mut y.data[r0 * wd * cout..r1 * wd * cout],
        );
        r0 = r1;
    }
    Ok(y)
}

/// Gradients of [`conv3x3_forward`]. Parameter gradients are accumulated
/// into `dw` and `db`; the input gradient is returned when requested.
pub fn conv3x3_backward(
    x: &Tensor,
    w: &Tensor,
    dy: &Tensor,
    dw: &mut Tensor,
    db: &mut Tensor,
    want_dx: bool,
) -> Result<Option<Tensor>> {
    let (h, wd, cin, cout) = check_conv(x, w, db)?;
    if dy.shape != [h, wd, cout] || dw.shape != w.shape {
        return Err(NeuralError::Shape(format!(
            "conv3x3 gradient {:?} for output {:?}",
            dy.shape,
            [h, wd, cout]
        )));
    }
    for px in dy.data.chunks_exact(cout) {
        for (g, v) in db.data.iter_mut().zip(px) {
            *g += v;
        }
    }
    let mut dx = want_dx.then(|| Tensor::zeros(&[h, wd, cin]));
    let rows = rows_per_chunk(wd, cin);
    let mut patches = vec![0.0; rows.min(h) * wd * 9 * cin];
    let mut r0 = 0;
    while r0 < h {
        let r1 = (r0 + rows).min(h);
        let m = (r1 - r0) * wd;
        let dyc = &dy.data[r0 * wd * cout..r1 * wd * cout];
        im2col(&x.data, h, wd, cin, r0, r1, &mut patches);
        gemm(9 * cin, m, cout, 1.0, &patches, true, dyc, false, 1.0, &mut dw.data);
        if let Some(dx) = dx.as_mut() {
            gemm(m, cout, 9 * cin, 1.0, dyc, false, &w.data, true, 0.0, &mut patches);
            col2im_add(&patches, h, wd, cin, r0, r1, &mut dx.data);
        }
        r0 = r1;
    }
    Ok(dx)
}

/// Mean over non-overlapping 2 × 2 blocks.
pub fn avgpool2_forward(x: &Tensor) -> Result<Tensor> {
    let (h, wd, c) = x.hwc()?;
    if h % 2 != 0 || wd % 2 != 0 {
        return Err(NeuralError::Shape(format!(
            "average pooling needs even dimensions, got {h}x{wd}"
        )));
    }
    let (ho, wo) = (h / 2, wd / 2);
    let mut y = Tensor::zeros(&[ho, wo, c]);
    for i in 0..ho {
        for j in 0..wo {
            let out = &mut y.data[(i * wo + j) * c..(i * wo + j + 1) * c];
            for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let s = ((2 * i + a) * wd + 2 * j + b) * c;
                for (o, v) in out.iter_mut().zip(&x.data[s..s + c]) {
                    *o += v;
                }
            }
            out.iter_mut().for_each(|o| *o *= 0.25);
        }
    }
    Ok(y)
}

pub fn avgpool2_backward(dy: &Tensor) -> Result<Tensor> {
    let (ho, wo, c) = dy.hwc()?;
    let wd = 2 * wo;
    let mut dx = Tensor::zeros(&[2 * ho, wd, c]);
    for i in 0..ho {
        for j in 0..wo {
            let g = &dy.data[(i * wo + j) * c..(i * wo + j + 1) * c];
            for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let s = ((2 * i + a) * wd + 2 * j + b) * c;
                for (d, v) in dx.data[s..s + c].iter_mut().zip(g) {
                    *d = 0.25 * v;
                }
            }
        }
    }
    Ok(dx)
}

fn check_deconv(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<(usize, usize, usize, usize)> {
    let (h, wd, cin) = x.hwc()?;
    if w.shape.len() != 4 || w.shape[0] != 2 || w.shape[1] != 2 || w.shape[2] != cin {
        return Err(NeuralError::Shape(format!(
            "deconv2x2 weights {:?} do not fit input {:?}",
            w.shape, x.shape
        )));
    }
    let cout = w.shape[3];
    if b.shape != [cout] {
        return Err(NeuralError::Shape(format!(
            "deconv2x2 bias {:?} for {cout} outputs",
            b.shape
        )));
    }
    Ok((h, wd, cin, cout))
}

/// Transposed 2 × 2 convolution with stride 2: input pixel `(i, j)` writes
/// the output block `(2i..2i+2, 2j..2j+2)`.
pub fn deconv2x2_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (h, wd, cin, cout) = check_deconv(x, w, b)?;
    let (ho, wo) = (2 * h, 2 * wd);
    let mut y = Tensor::zeros(&[ho, wo, cout]);
    let mut tmp = vec![0.0; h * wd * cout];
    for (ab, (a, bb)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
        let wab = &w.data[ab * cin * cout..(ab + 1) * cin * cout];
        gemm(h * wd, cin, cout, 1.0, &x.data, false, wab, false, 0.0, &mut tmp);
        for i in 0..h {
            for j in 0..wd {
                let s = ((2 * i + a) * wo + 2 * j + bb) * cout;
                let src = &tmp[(i * wd + j) * cout..(i * wd + j + 1) * cout];
                for ((o, v), bias) in y.data[s..s + cout].iter_mut().zip(src).zip(&b.data) {
                    *o = v + bias;
                }
            }
        }
    }
    Ok(y)
}

pub fn deconv2x2_backward(
    x: &Tensor,
    w: &Tensor,
    dy: &Tensor,
    dw: &mut Tensor,
    db: &mut Tensor,
    want_dx: bool,
) -> Result<Option<Tensor>> {
    let (h, wd, cin, cout) = check_deconv(x, w, db)?;
    let (ho, wo) = (2 * h, 2 * wd);
    if dy.shape != [ho, wo, cout] || dw.shape != w.shape {
        return Err(NeuralError::Shape(format!(
            "deconv2x2 gradient {:?} for output {:?}",
            dy.shape,
            [ho, wo, cout]
        )));
    }
    for px in dy.data.chunks_exact(cout) {
        for (g, v) in db.data.iter_mut().zip(px) {
            *g += v;
        }
    }
    let mut dx = want_dx.then(|| Tensor::zeros(&[h, wd, cin]));
    let mut tmp = vec![0.0; h * wd * cout];
    for (ab, (a, bb)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
        for i in 0..h {
            for j in 0..wd {
                let s = ((2 * i + a) * wo + 2 * j + bb) * cout;
                tmp[(i * wd + j) * cout..(i * wd + j + 1) * cout]
                    .copy_from_slice(&dy.data[s..s + cout]);
            }
        }
        let range = ab * cin * cout..(ab + 1) * cin * cout;
        gemm(cin, h * wd, cout, 1.0, &x.data, true, &tmp, false, 1.0, &mut dw.data[range.clone()]);
        if let Some(dx) = dx.as_mut() {
            gemm(h * wd, cout, cin, 1.0, &tmp, false, &w.data[range], true, 1.0, &mut dx.data);
        }
    }
    Ok(dx)
}

pub fn relu_forward(x: &Tensor) -> Tensor {
    Tensor {
        shape: x.shape.clone(),
        // NaN must survive so that divergence is detected downstream.
        data: x.data.iter().map(|&v| if v < 0.0 { 0.0 } else { v }).collect(),
    }
}

/// Passes the gradient where the forward output was positive.
pub fn relu_backward(y: &Tensor, dy: &Tensor) -> Result<Tensor> {
    if y.shape != dy.shape {
        return Err(NeuralError::Shape(format!(
            "relu gradient {:?} for activation {:?}",
            dy.shape, y.shape
        )));
    }
    Ok(Tensor {
        shape: y.shape.clone(),
        data: y
            .data
            .iter()
            .zip(&dy.data)
            .map(|(&a, &g)| if a > 0.0 { g } else { 0.0 })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(shape: &[usize], rng: &mut impl Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn naive_conv(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
        let (h, wd, cin) = x.hwc().unwrap();
        let cout = w.shape[3];
        let mut y = Tensor::zeros(&[h, wd, cout]);
        for i in 0..h {
            for j in 0..wd {
                for co in 0..cout {
                    let mut s = b.data[co];
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let (ii, jj) = (i as isize + ky - 1, j as isize + kx - 1);
                            if ii < 0 || jj < 0 || ii >= h as isize || jj >= wd as isize {
                                continue;
                            }
                            for ci in 0..cin {
                                let xv = x.data[(ii as usize * wd + jj as usize) * cin + ci];
                                let wv = w.data[((ky as usize * 3 + kx as usize) * cin + ci) * cout + co];
                                s += xv * wv;
                            }
                        }
                    }
                    y.data[(i * wd + j) * cout + co] = s;
                }
            }
        }
        y
    }

    #[test]
    fn conv_identity_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = rand_tensor(&[4, 5, 1], &mut rng);
        let mut w = Tensor::zeros(&[3, 3, 1, 1]);
        w.data[4] = 1.0;
        let y = conv3x3_forward(&x, &w, &Tensor::zeros(&[1])).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn conv_all_ones() {
        let x = Tensor::filled(&[5, 5, 1], 1.0);
        let w = Tensor::filled(&[3, 3, 1, 1], 1.0);
        let y = conv3x3_forward(&x, &w, &Tensor::zeros(&[1])).unwrap();
        assert_eq!(y.data[2 * 5 + 2], 9.0);
        assert_eq!(y.data[0], 4.0);
        assert_eq!(y.data[2], 6.0);
    }

    #[test]
    fn conv_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = rand_tensor(&[6, 7, 3], &mut rng);
        let w = rand_tensor(&[3, 3, 3, 4], &mut rng);
        let b = rand_tensor(&[4], &mut rng);
        let y = conv3x3_forward(&x, &w, &b).unwrap();
        let r = naive_conv(&x, &w, &b);
        for (a, b) in y.data.iter().zip(&r.data) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn conv_rejects_bad_weights() {
        let x = Tensor::zeros(&[4, 4, 2]);
        assert!(conv3x3_forward(&x, &Tensor::zeros(&[3, 3, 3, 1]), &Tensor::zeros(&[1])).is_err());
        assert!(conv3x3_forward(&x, &Tensor::zeros(&[3, 3, 2, 1]), &Tensor::zeros(&[2])).is_err());
    }

    #[test]
    fn pooling() {
        let x = Tensor::new(vec![2, 2, 1], vec![1., 2., 3., 4.]).unwrap();
        assert_eq!(avgpool2_forward(&x).unwrap().data, vec![2.5]);
        let c = Tensor::filled(&[4, 6, 2], 0.7);
        assert!(avgpool2_forward(&c).unwrap().data.iter().all(|&v| (v - 0.7).abs() < 1e-15));
        assert!(avgpool2_forward(&Tensor::zeros(&[3, 4, 1])).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = rand_tensor(&[4, 4, 2], &mut rng);
        let y = avgpool2_forward(&x).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for c in 0..2 {
                    let s: f64 = [(0, 0), (0, 1), (1, 0), (1, 1)]
                        .iter()
                        .map(|(a, b)| x.data[((2 * i + a) * 4 + 2 * j + b) * 2 + c])
                        .sum();
                    assert!((4.0 * y.data[(i * 2 + j) * 2 + c] - s).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn deconv_single_pixel() {
        let x = Tensor::new(vec![1, 1, 1], vec![0.3]).unwrap();
        let y = deconv2x2_forward(&x, &Tensor::filled(&[2, 2, 1, 1], 1.0), &Tensor::zeros(&[1]))
            .unwrap();
        assert_eq!(y.shape, vec![2, 2, 1]);
        assert!(y.data.iter().all(|&v| v == 0.3));
    }

    #[test]
    fn deconv_matches_scatter_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (h, wd, cin, cout) = (3, 4, 3, 2);
        let x = rand_tensor(&[h, wd, cin], &mut rng);
        let w = rand_tensor(&[2, 2, cin, cout], &mut rng);
        let b = rand_tensor(&[cout], &mut rng);
        let y = deconv2x2_forward(&x, &w, &b).unwrap();
        let mut r = vec![0.0; 4 * h * wd * cout];
        for i in 0..h {
            for j in 0..wd {
                for a in 0..2 {
                    for bb in 0..2 {
                        for co in 0..cout {
                            let mut s = b.data[co];
                            for ci in 0..cin {
                                s += x.data[(i * wd + j) * cin + ci]
                                    * w.data[((a * 2 + bb) * cin + ci) * cout + co];
                            }
                            r[((2 * i + a) * 2 * wd + 2 * j + bb) * cout + co] = s;
                        }
                    }
                }
            }
        }
        for (a, b) in y.data.iter().zip(&r) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn deconv_blocks_are_disjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = rand_tensor(&[3, 3, 2], &mut rng);
        let w = rand_tensor(&[2, 2, 2, 2], &mut rng);
        let b = Tensor::zeros(&[2]);
        let y0 = deconv2x2_forward(&x, &w, &b).unwrap();
        let mut x1 = x.clone();
        x1.data[(1 * 3 + 2) * 2] += 1.0;
        let y1 = deconv2x2_forward(&x1, &w, &b).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let changed = (0..2).any(|c| y0.data[(i * 6 + j) * 2 + c] != y1.data[(i * 6 + j) * 2 + c]);
                if changed {
                    assert_eq!((i / 2, j / 2), (1, 2));
                }
            }
        }
    }

    #[test]
    fn relu_gradient_mask() {
        let x = Tensor::new(vec![1, 1, 4], vec![-1.0, 0.0, 0.5, 2.0]).unwrap();
        let y = relu_forward(&x);
        let g = relu_backward(&y, &Tensor::filled(&[1, 1, 4], 3.0)).unwrap();
        assert_eq!(g.data, vec![0.0, 0.0, 3.0, 3.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = rand_tensor(&[4, 4, 2], &mut rng);
        let w = rand_tensor(&[3, 3, 2, 3], &mut rng);
        let mut dw = Tensor::zeros(&w.shape);
        let mut db = Tensor::zeros(&[3]);
        let dx = conv3x3_backward(&x, &w, &Tensor::zeros(&[4, 4, 3]), &mut dw, &mut db, true)
            .unwrap()
            .unwrap();
        assert!(dx.data.iter().chain(&dw.data).chain(&db.data).all(|&v| v == 0.0));
    }
}
