//! Analytic gradients against central finite differences, in f64.
//!
//! With its ReLU pattern fixed, a network is affine in any single input
//! pixel or weight, so the two one-sided differences agree. A probe whose
//! ±h step straddles a ReLU kink makes them disagree; such coordinates are
//! left out, and at most a tenth of them may be. Networks that are smooth
//! (sigmoid heads) are probed without skipping. Cross-entropy is taken on
//! the logit, so the composed observer is checked up to its logit and the
//! sigmoid on its own.

use rand::Rng as _;
use sriq_core::nn::{Conv2d, Dense, Layer, Network, ResidualBlock, Tensor};
use sriq_core::rng;

const H: f64 = 1e-3;
const TOL: f64 = 1e-4;

fn random_tensor(c: usize, h: usize, w: usize, seed: u64) -> Tensor<f64> {
    let mut r = rng::rng(seed);
    Tensor::from_vec(c, h, w, (0..c * h * w).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// `Σ r_i y_i` for a fixed random `r`, so the upstream gradient is `r`.
fn objective(net: &Network<f64>, x: &Tensor<f64>, r: &[f64]) -> f64 {
    let y = net.forward(x).unwrap();
    y.data.iter().zip(r).map(|(a, b)| a * b).sum()
}

/// Central difference, or `None` across a kink.
fn central(f0: f64, fp: f64, fm: f64, piecewise: bool) -> Option<f64> {
    let (right, left) = ((fp - f0) / H, (f0 - fm) / H);
    let scale = right.abs().max(left.abs()).max(1e-6);
    let straddles = piecewise && (right - left).abs() > 1e-6 * scale;
    (!straddles).then_some((fp - fm) / (2.0 * H))
}

fn max_rel_error(analytic: &[f64], numeric: &[Option<f64>], label: &str) -> f64 {
    let skipped = numeric.iter().filter(|n| n.is_none()).count();
    assert!(skipped * 10 <= numeric.len(), "{label}: {skipped} of {} probes cross a kink", numeric.len());
    let pairs: Vec<(f64, f64)> = analytic.iter().zip(numeric).filter_map(|(a, n)| n.map(|n| (*a, n))).collect();
    let scale = pairs.iter().fold(0.0f64, |m, (a, n)| m.max(a.abs()).max(n.abs())).max(1e-12);
    pairs.iter().map(|(a, n)| (a - n).abs()).fold(0.0, f64::max) / scale
}

fn check(net: Network<f64>, x: Tensor<f64>, label: &str) {
    let piecewise = !net.layers.iter().any(|l| matches!(l, Layer::Sigmoid));
    let (c, h, w) = net.output_dims(x.height, x.width).unwrap();
    let mut rr = rng::rng(77);
    let r: Vec<f64> = (0..c * h * w).map(|_| rr.gen_range(-1.0..1.0)).collect();
    let (_, cache) = net.forward_cached(&x, net.layers.len()).unwrap();
    let upstream = Tensor::from_vec(c, h, w, r.clone()).unwrap();
    let grads = net.backward(&cache, &upstream, true).unwrap();

    let f0 = objective(&net, &x, &r);
    let mut numeric_input = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp.data[i] += H;
        xm.data[i] -= H;
        numeric_input.push(central(f0, objective(&net, &xp, &r), objective(&net, &xm, &r), piecewise));
    }
    let e = max_rel_error(&grads.input.as_ref().unwrap().data, &numeric_input, label);
    assert!(e < TOL, "{label}: input gradient error {e}");

    let n_tensors = net.params().len();
    for t in 0..n_tensors {
        let len = net.params()[t].len();
        let mut numeric = Vec::with_capacity(len);
        for i in 0..len {
            let mut plus = net.clone();
            plus.params_mut()[t][i] += H;
            let mut minus = net.clone();
            minus.params_mut()[t][i] -= H;
            numeric.push(central(f0, objective(&plus, &x, &r), objective(&minus, &x, &r), piecewise));
        }
        let e = max_rel_error(&grads.params[t], &numeric, label);
        assert!(e < TOL, "{label}: parameter tensor {t} error {e}");
    }
}

fn randomized(net: Network<f64>, seed: u64) -> Network<f64> {
    randomized_scaled(net, seed, 0.5)
}

/// Larger weights spread pre-activations further from the ReLU kinks.
fn randomized_scaled(mut net: Network<f64>, seed: u64, amplitude: f64) -> Network<f64> {
    let mut r = rng::rng(seed);
    for p in net.params_mut() {
        p.iter_mut().for_each(|v| *v = r.gen_range(-amplitude..amplitude));
    }
    net
}

#[test]
fn conv_gradients() {
    for (cin, cout, k) in [(1, 1, 1), (1, 3, 3), (2, 2, 5)] {
        let net = randomized(Network::new(cin, vec![Layer::Conv(Conv2d::zeros(cin, cout, k).unwrap())]), 1);
        check(net, random_tensor(cin, 6, 5, 2), "conv");
    }
}

#[test]
fn relu_gradients() {
    let net = Network::new(2, vec![Layer::Relu]);
    check(net, random_tensor(2, 4, 4, 3), "relu");
}

#[test]
fn residual_gradients() {
    let net = randomized(Network::new(2, vec![Layer::Residual(ResidualBlock::zeros(2, 3).unwrap())]), 4);
    check(net, random_tensor(2, 5, 5, 5), "residual");
}

#[test]
fn pooling_dense_sigmoid_affine_gradients() {
    check(Network::new(3, vec![Layer::GlobalAvgPool]), random_tensor(3, 4, 3, 6), "pool");
    let dense = randomized(Network::new(4, vec![Layer::Dense(Dense::zeros(4, 3).unwrap())]), 7);
    check(dense, random_tensor(4, 1, 1, 8), "dense");
    check(Network::new(3, vec![Layer::Sigmoid]), random_tensor(3, 1, 1, 9), "sigmoid");
    let head = randomized(Network::new(4, vec![Layer::Dense(Dense::zeros(4, 1).unwrap()), Layer::Sigmoid]), 17);
    check(head, random_tensor(4, 1, 1, 18), "dense+sigmoid");
    check(Network::new(1, vec![Layer::Affine { scale: -1.7, shift: 0.3 }]), random_tensor(1, 3, 3, 10), "affine");
}

#[test]
fn composed_observer_gradients() {
    let net = randomized_scaled(
        Network::new(
            1,
            vec![
                Layer::Affine { scale: 0.8, shift: -0.1 },
                Layer::Conv(Conv2d::zeros(1, 3, 3).unwrap()),
                Layer::Relu,
                Layer::Residual(ResidualBlock::zeros(3, 3).unwrap()),
                Layer::Residual(ResidualBlock::zeros(3, 3).unwrap()),
                Layer::GlobalAvgPool,
                Layer::Dense(Dense::zeros(3, 1).unwrap()),
            ],
        ),
        11,
        2.0,
    );
    check(net, random_tensor(1, 5, 5, 12), "observer");
}

#[test]
fn composed_srcnn_gradients() {
    let net = randomized_scaled(
        Network::new(
            1,
            vec![
                Layer::Conv(Conv2d::zeros(1, 2, 5).unwrap()),
                Layer::Relu,
                Layer::Conv(Conv2d::zeros(2, 2, 3).unwrap()),
                Layer::Relu,
                Layer::Conv(Conv2d::zeros(2, 1, 3).unwrap()),
            ],
        ),
        13,
        2.0,
    );
    check(net, random_tensor(1, 7, 6, 14), "srcnn");
}

#[test]
fn forward_is_batch_order_independent() {
    let net = randomized(
        Network::new(1, vec![Layer::Conv(Conv2d::zeros(1, 2, 3).unwrap()), Layer::Relu, Layer::GlobalAvgPool]),
        15,
    );
    let xs: Vec<Tensor<f64>> = (0..4).map(|s| random_tensor(1, 5, 5, 100 + s)).collect();
    let forward: Vec<_> = xs.iter().map(|x| net.forward(x).unwrap()).collect();
    let reverse: Vec<_> = xs.iter().rev().map(|x| net.forward(x).unwrap()).collect();
    for (a, b) in forward.iter().zip(reverse.iter().rev()) {
        assert_eq!(a, b);
    }
}

#[test]
fn relu_output_and_mask() {
    let net = Network::new(1, vec![Layer::Relu]);
    let x = random_tensor(1, 6, 6, 16);
    let (y, cache) = net.forward_cached(&x, 1).unwrap();
    assert!(y.data.iter().all(|&v| v >= 0.0));
    let g = net.backward(&cache, &Tensor::from_vec(1, 6, 6, vec![1.0; 36]).unwrap(), true).unwrap();
    for (xi, gi) in x.data.iter().zip(&g.input.unwrap().data) {
        if *xi < 0.0 {
            assert_eq!(*gi, 0.0);
        }
    }
}
