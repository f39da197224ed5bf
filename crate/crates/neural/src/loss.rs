use wbeam_core::Complex64;

use crate::{NeuralError, Result, Tensor};

/// `1/TF Σ (Y - |S_R|)²` and its gradient with respect to `Y`.
pub fn loss_l1(y: &Tensor, target: &[f64]) -> Result<(f64, Tensor)> {
    if y.len() != target.len() {
        return Err(NeuralError::Shape(format!(
            "magnitude estimate has {} values, target {}",
            y.len(),
            target.len()
        )));
    }
    let n = target.len().max(1) as f64;
    let mut grad = Tensor::zeros(&y.shape);
    let mut loss = 0.0;
    for ((g, &a), &b) in grad.data.iter_mut().zip(&y.data).zip(target) {
        let d = a - b;
        loss += d * d;
        *g = 2.0 * d / n;
    }
    Ok((loss / n, grad))
}

/// `1/TF Σ |Ŝ - S_R|²` and its gradient, packed as `∂/∂Re + j ∂/∂Im`.
pub fn loss_l2(estimate: &[Complex64], reference: &[Complex64]) -> Result<(f64, Vec<Complex64>)> {
    if estimate.len() != reference.len() {
        return Err(NeuralError::Shape(format!(
            "estimate has {} bins, reference {}",
            estimate.len(),
            reference.len()
        )));
    }
    let n = reference.len().max(1) as f64;
    let mut loss = 0.0;
    let grad = estimate
        .iter()
        .zip(reference)
        .map(|(a, b)| {
            let d = a - b;
            loss += d.norm_sqr();
            d * (2.0 / n)
        })
        .collect();
    Ok((loss / n, grad))
}

/// `Ŝ = Σ_m (a_m + j b_m) X_m` for a `T × F × 2M` filter tensor holding the
/// conjugated weights (real parts first).
pub fn apply_filter(w: &Tensor, noisy: &[Complex64], mics: usize) -> Result<Vec<Complex64>> {
    let (t, f, c) = w.hwc()?;
    if c != 2 * mics || noisy.len() != t * f * mics {
        return Err(NeuralError::Shape(format!(
            "filters {:?} do not match {} noisy coefficients for {mics} mics",
            w.shape,
            noisy.len()
        )));
    }
    Ok(w.data
        .chunks_exact(c)
        .zip(noisy.chunks_exact(mics))
        .map(|(wp, xp)| {
            (0..mics)
                .map(|m| Complex64::new(wp[m], wp[mics + m]) * xp[m])
                .sum()
        })
        .collect())
}

/// Gradient of a real loss with respect to the filter tensor, given the
/// packed gradient `g = ∂L/∂Re Ŝ + j ∂L/∂Im Ŝ`.
pub fn apply_filter_backward(
    g: &[Complex64],
    noisy: &[Complex64],
    frames: usize,
    bins: usize,
    mics: usize,
) -> Result<Tensor> {
    if g.len() != frames * bins || noisy.len() != frames * bins * mics {
        return Err(NeuralError::Shape("filter gradient shapes disagree".into()));
    }
    let mut dw = Tensor::zeros(&[frames, bins, 2 * mics]);
    for ((d, gp), xp) in dw
        .data
        .chunks_exact_mut(2 * mics)
        .zip(g)
        .zip(noisy.chunks_exact(mics))
    {
        for m in 0..mics {
            let x = xp[m];
            d[m] = gp.re * x.re + gp.im * x.im;
            d[mics + m] = -gp.re * x.im + gp.im * x.re;
        }
    }
    Ok(dw)
}
