//! Central finite-difference checks of every layer, both losses and the
//! assembled networks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wbeam_core::Complex64;
use wbeam_neural::layers::*;
use wbeam_neural::loss::{apply_filter, apply_filter_backward, loss_l1, loss_l2};
use wbeam_neural::{Example, Objective, ParamStore, Tensor, UNet, UNetSpec, UNetTape, WNet};

const STEP: f64 = 1e-3;
// Whole networks have many units near a ReLU kink; a coarse step straddles them.
const NET_STEP: f64 = 1e-6;
const TOL: f64 = 1e-4;

fn rand_tensor(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// `‖a - n‖ / max(‖a‖, ‖n‖)`.
fn rel_err(a: &[f64], n: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(n).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let s = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(n.iter().map(|x| x * x).sum::<f64>().sqrt());
    if s == 0.0 {
        0.0
    } else {
        d / s
    }
}

/// Numerical gradient of `f` with respect to every entry of `x`.
fn numeric(x: &Tensor, mut f: impl FnMut(&Tensor) -> f64) -> Vec<f64> {
    let mut xp = x.clone();
    (0..x.len())
        .map(|i| {
            let v = xp.data[i];
            xp.data[i] = v + STEP;
            let up = f(&xp);
            xp.data[i] = v - STEP;
            let down = f(&xp);
            xp.data[i] = v;
            (up - down) / (2.0 * STEP)
        })
        .collect()
}

/// Scalar objective `Σ r ⊙ y` for a fixed random projection `r`.
fn project(y: &Tensor, r: &Tensor) -> f64 {
    y.data.iter().zip(&r.data).map(|(a, b)| a * b).sum()
}

#[test]
fn conv3x3_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for case in 0..20 {
        let h = 4 + case % 5;
        let w = 4 + (case * 3) % 5;
        let (cin, cout) = (1 + case % 3, 1 + (case / 3) % 3);
        let x = rand_tensor(&[h, w, cin], &mut rng);
        let k = rand_tensor(&[3, 3, cin, cout], &mut rng);
        let b = rand_tensor(&[cout], &mut rng);
        let r = rand_tensor(&[h, w, cout], &mut rng);
        let mut dw = Tensor::zeros(&k.shape);
        let mut db = Tensor::zeros(&b.shape);
        let dx = conv3x3_backward(&x, &k, &r, &mut dw, &mut db, true).unwrap().unwrap();
        let nx = numeric(&x, |x| project(&conv3x3_forward(x, &k, &b).unwrap(), &r));
        let nw = numeric(&k, |k| project(&conv3x3_forward(&x, k, &b).unwrap(), &r));
        let nb = numeric(&b, |b| project(&conv3x3_forward(&x, &k, b).unwrap(), &r));
        assert!(rel_err(&dx.data, &nx) < TOL);
        assert!(rel_err(&dw.data, &nw) < TOL);
        assert!(rel_err(&db.data, &nb) < TOL);
    }
}

#[test]
fn deconv2x2_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..20 {
        let (h, w) = (2 + case % 3, 2 + (case / 3) % 3);
        let (cin, cout) = (1 + case % 4, 1 + (case / 2) % 3);
        let x = rand_tensor(&[h, w, cin], &mut rng);
        let k = rand_tensor(&[2, 2, cin, cout], &mut rng);
        let b = rand_tensor(&[cout], &mut rng);
        let r = rand_tensor(&[2 * h, 2 * w, cout], &mut rng);
        let mut dw = Tensor::zeros(&k.shape);
        let mut db = Tensor::zeros(&b.shape);
        let dx = deconv2x2_backward(&x, &k, &r, &mut dw, &mut db, true).unwrap().unwrap();
        let nx = numeric(&x, |x| project(&deconv2x2_forward(x, &k, &b).unwrap(), &r));
        let nw = numeric(&k, |k| project(&deconv2x2_forward(&x, k, &b).unwrap(), &r));
        let nb = numeric(&b, |b| project(&deconv2x2_forward(&x, &k, b).unwrap(), &r));
        assert!(rel_err(&dx.data, &nx) < TOL);
        assert!(rel_err(&dw.data, &nw) < TOL);
        assert!(rel_err(&db.data, &nb) < TOL);
    }
}

#[test]
fn avgpool2_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in 0..20 {
        let (h, w, c) = (2 * (2 + case % 3), 2 * (2 + case % 2), 1 + case % 3);
        let x = rand_tensor(&[h, w, c], &mut rng);
        let r = rand_tensor(&[h / 2, w / 2, c], &mut rng);
        let dx = avgpool2_backward(&r).unwrap();
        let nx = numeric(&x, |x| project(&avgpool2_forward(x).unwrap(), &r));
        assert!(rel_err(&dx.data, &nx) < TOL);
    }
}

#[test]
fn relu_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        // Keep inputs away from the kink so the finite difference is exact.
        let mut x = rand_tensor(&[4, 6, 2], &mut rng);
        for v in x.data.iter_mut() {
            if v.abs() < 0.01 {
                *v = 0.5;
            }
        }
        let r = rand_tensor(&[4, 6, 2], &mut rng);
        let dx = relu_backward(&relu_forward(&x), &r).unwrap();
        let nx = numeric(&x, |x| project(&relu_forward(x), &r));
        assert!(rel_err(&dx.data, &nx) < TOL);
    }
}

#[test]
fn loss_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for case in 0..20 {
        let (t, f) = (4 + case % 4, 4 + case % 5);
        let y = rand_tensor(&[t, f, 1], &mut rng);
        let target: Vec<f64> = (0..t * f).map(|_| rng.gen_range(0.0..1.0)).collect();
        let (_, g) = loss_l1(&y, &target).unwrap();
        let n = numeric(&y, |y| loss_l1(y, &target).unwrap().0);
        assert!(rel_err(&g.data, &n) < TOL);

        // L2 through the filter-and-sum, differentiated w.r.t. the filters.
        let m = 1 + case % 3;
        let w = rand_tensor(&[t, f, 2 * m], &mut rng);
        let x: Vec<Complex64> = (0..t * f * m)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let s: Vec<Complex64> = (0..t * f)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let l2 = |w: &Tensor| loss_l2(&apply_filter(w, &x, m).unwrap(), &s).unwrap().0;
        let (_, gs) = loss_l2(&apply_filter(&w, &x, m).unwrap(), &s).unwrap();
        let gw = apply_filter_backward(&gs, &x, t, f, m).unwrap();
        assert!(rel_err(&gw.data, &numeric(&w, l2)) < TOL);
    }
}

#[test]
fn loss_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let y = rand_tensor(&[3, 5, 1], &mut rng);
    let shifted: Vec<f64> = y.data.iter().map(|v| v - 0.3).collect();
    assert!((loss_l1(&y, &shifted).unwrap().0 - 0.09).abs() < 1e-12);
    // Oracle: explicit double loop.
    let target: Vec<f64> = (0..15).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut direct = 0.0;
    for i in 0..15 {
        direct += (y.data[i] - target[i]).powi(2);
    }
    assert!((loss_l1(&y, &target).unwrap().0 - direct / 15.0).abs() < 1e-14);
    let a: Vec<Complex64> = (0..15).map(|i| Complex64::new(i as f64, 1.0)).collect();
    let b: Vec<Complex64> = (0..15).map(|i| Complex64::new(1.0, i as f64)).collect();
    let direct: f64 = a.iter().zip(&b).map(|(x, y)| (x.re - y.re).powi(2) + (x.im - y.im).powi(2)).sum();
    assert!((loss_l2(&a, &b).unwrap().0 - direct / 15.0).abs() < 1e-12);
}

/// Zero-initialised biases put dead units exactly on the ReLU kink, where a
/// central difference is one-sided; move them off it.
fn jitter_biases(store: &mut ParamStore, ids: &[usize], rng: &mut impl Rng) {
    for &id in ids {
        if store.get(id).name.ends_with(".b") {
            for v in store.get_mut(id).value.data.iter_mut() {
                *v = rng.gen_range(0.05..0.3);
            }
        }
    }
}

/// Spot-checks a handful of parameters of a whole network.
fn check_params(
    store: &mut ParamStore,
    ids: &[usize],
    rng: &mut impl Rng,
    analytic: &ParamStore,
    mut f: impl FnMut(&ParamStore) -> f64,
) {
    let mut a = Vec::new();
    let mut n = Vec::new();
    for &id in ids {
        let len = store.get(id).value.len();
        for _ in 0..2 {
            let i = rng.gen_range(0..len);
            let v = store.get(id).value.data[i];
            store.get_mut(id).value.data[i] = v + NET_STEP;
            let up = f(store);
            store.get_mut(id).value.data[i] = v - NET_STEP;
            let down = f(store);
            store.get_mut(id).value.data[i] = v;
            a.push(analytic.get(id).grad.data[i]);
            n.push((up - down) / (2.0 * NET_STEP));
        }
    }
    let e = rel_err(&a, &n);
    if std::env::var("GRAD_DEBUG").is_ok() {
        for (x, y) in a.iter().zip(&n) {
            eprintln!("{x:.6e} {y:.6e}");
        }
    }
    assert!(e < TOL, "relative error {e}");
}

#[test]
fn unet_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let spec = UNetSpec {
        in_channels: 2,
        out_channels: 2,
        encoder: vec![vec![3], vec![4, 4], vec![5]],
        decoder: vec![vec![4, 3], vec![3], vec![2]],
    };
    let mut store = ParamStore::new();
    let net = UNet::register(spec, "u", &mut store, &mut rng).unwrap();
    jitter_biases(&mut store, &net.param_ids(), &mut rng);
    let x = rand_tensor(&[8, 16, 2], &mut rng);
    let r = rand_tensor(&[8, 16, 2], &mut rng);
    let mut tape = UNetTape::new();
    net.forward(&store, &x, Some(&mut tape)).unwrap();
    let mut analytic = store.clone();
    let dx = net.backward(&mut analytic, &tape, &r, true).unwrap().unwrap();
    let ids = net.param_ids();
    check_params(&mut store, &ids, &mut rng, &analytic, |s| {
        project(&net.forward(s, &x, None).unwrap(), &r)
    });
    let nx = numeric(&x, |x| project(&net.forward(&store, x, None).unwrap(), &r));
    assert!(rel_err(&dx.data, &nx) < TOL);
}

fn random_example(t: usize, f: usize, m: usize, rng: &mut impl Rng) -> Example {
    let values = (0..t * f * 2 * m)
        .map(|i| {
            if i % (2 * m) < m {
                rng.gen_range(0.1..1.0)
            } else {
                rng.gen_range(-3.0..3.0)
            }
        })
        .collect();
    let feat = wbeam_core::dsp::FeatureTensor {
        frames: t,
        bins: f,
        mics: m,
        values,
    };
    let s: Vec<Complex64> = (0..t * f)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    Example::new(&feat, &s).unwrap()
}

#[test]
fn wnet_joint_gradient_reaches_first_network() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut store = ParamStore::new();
    let net = WNet::register(2, 32, &mut store, &mut rng).unwrap();
    let all: Vec<usize> = (0..store.len()).collect();
    jitter_biases(&mut store, &all, &mut rng);
    let ex = random_example(64, 64, 2, &mut rng);
    for obj in [Objective::Magnitude, Objective::FilterOracle, Objective::Joint] {
        let mut analytic = store.clone();
        analytic.zero_grads();
        net.loss_and_backward(&mut analytic, &ex, obj).unwrap();
        let ids: Vec<usize> = match obj {
            Objective::Magnitude => net.unet1.param_ids(),
            Objective::FilterOracle => net.unet2.param_ids(),
            Objective::Joint => net.unet1.param_ids(),
        };
        // A few layers keep the number of forward passes small.
        let pick: Vec<usize> = ids.iter().copied().step_by(5).collect();
        check_params(&mut store, &pick, &mut rng, &analytic, |s| {
            net.loss(s, &ex, obj).unwrap()
        });
        if obj == Objective::Joint {
            let any = ids
                .iter()
                .any(|&i| analytic.get(i).grad.data.iter().any(|&g| g != 0.0));
            assert!(any);
        }
    }
}
