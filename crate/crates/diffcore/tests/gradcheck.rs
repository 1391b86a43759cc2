//! Gradient correctness against the central finite-difference oracle, plus
//! the determinism, linearity, and shape-arithmetic contracts.

use qt_diffcore::{finite_diff_gradient, Graph, NodeId, Padding, Tensor};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    Tensor::new(shape, data).unwrap()
}

/// |a − b| ≤ atol + rtol·max(|a|, |b|), reported per coordinate.
fn assert_close(actual: &[f64], expected: &[f64], rtol: f64, atol: f64, what: &str) {
    assert_eq!(actual.len(), expected.len(), "{what}: length mismatch");
    for (i, (a, e)) in actual.iter().zip(expected).enumerate() {
        let tol = atol + rtol * a.abs().max(e.abs());
        assert!(
            (a - e).abs() <= tol,
            "{what}[{i}]: got {a}, expected {e} (tol {tol})"
        );
    }
}

/// Checks backward against finite differences for one parameter node of a
/// scalar-loss graph. The probe function re-evaluates the graph with the
/// parameter replaced, so the oracle only exercises the forward path.
fn check_param_gradient(graph: &mut Graph, param: NodeId, loss: NodeId, what: &str) {
    let fwd = graph.evaluate(&[]).unwrap();
    let grads = graph.backward(&fwd, loss).unwrap();
    let analytic = grads.grad(param).expect("param gradient").clone();

    let base = fwd.value(param).clone();
    let fd = finite_diff_gradient(
        |t| {
            graph.set_value(param, t.data()).unwrap();
            let f = graph.evaluate(&[]).unwrap();
            f.value(loss).scalar_value().unwrap()
        },
        &base,
        1e-5,
    );
    graph.set_value(param, base.data()).unwrap();
    assert_close(analytic.data(), fd.data(), 1e-6, 1e-9, what);
}

#[test]
fn matmul_gradient_matches_finite_differences() {
    for seed in 0..20 {
        let mut r = rng(seed);
        let mut g = Graph::new();
        let a = g.parameter(random_tensor(&[3, 4], &mut r, -1.0, 1.0));
        let b = g.parameter(random_tensor(&[4, 2], &mut r, -1.0, 1.0));
        let c = g.matmul(a, b);
        let sq = g.mul(c, c);
        let loss = g.sum(sq);
        check_param_gradient(&mut g, a, loss, &format!("matmul a (seed {seed})"));
        check_param_gradient(&mut g, b, loss, &format!("matmul b (seed {seed})"));
    }
}

#[test]
fn matmul_transpose_b_gradient_matches_finite_differences() {
    for seed in 0..20 {
        let mut r = rng(100 + seed);
        let mut g = Graph::new();
        let x = g.parameter(random_tensor(&[3, 5], &mut r, -1.0, 1.0));
        let w = g.parameter(random_tensor(&[2, 5], &mut r, -1.0, 1.0));
        let y = g.matmul_tb(x, w);
        let sq = g.mul(y, y);
        let loss = g.sum(sq);
        check_param_gradient(&mut g, x, loss, &format!("matmul_tb x (seed {seed})"));
        check_param_gradient(&mut g, w, loss, &format!("matmul_tb w (seed {seed})"));
    }
}

#[test]
fn conv2d_gradient_matches_finite_differences() {
    for (seed, padding) in (0..10).flat_map(|s| [(s, Padding::Valid), (s, Padding::Same)]) {
        let mut r = rng(200 + seed);
        let mut g = Graph::new();
        let x = g.parameter(random_tensor(&[2, 2, 6, 6], &mut r, -1.0, 1.0));
        let w = g.parameter(random_tensor(&[3, 2, 3, 3], &mut r, -1.0, 1.0));
        let y = g.conv2d(x, w, padding);
        let t = g.tanh(y);
        let loss = g.sum(t);
        check_param_gradient(&mut g, x, loss, &format!("conv2d x (seed {seed} {padding:?})"));
        check_param_gradient(&mut g, w, loss, &format!("conv2d w (seed {seed} {padding:?})"));
    }
}

#[test]
fn bias_add_gradient_matches_finite_differences() {
    for seed in 0..20 {
        let mut r = rng(300 + seed);
        let mut g = Graph::new();
        let x = g.parameter(random_tensor(&[3, 4], &mut r, -1.0, 1.0));
        let b = g.parameter(random_tensor(&[4], &mut r, -1.0, 1.0));
        let y = g.bias_add(x, b);
        let t = g.tanh(y);
        let loss = g.sum(t);
        check_param_gradient(&mut g, x, loss, &format!("bias_add x (seed {seed})"));
        check_param_gradient(&mut g, b, loss, &format!("bias_add b (seed {seed})"));
    }
}

#[test]
fn tanh_mul_add_scale_gradients_match_finite_differences() {
    for seed in 0..20 {
        let mut r = rng(400 + seed);
        let mut g = Graph::new();
        let x = g.parameter(random_tensor(&[6], &mut r, -2.0, 2.0));
        let y = g.parameter(random_tensor(&[6], &mut r, -2.0, 2.0));
        let t = g.tanh(x);
        let m = g.mul(t, y);
        let a = g.add(m, x);
        let s = g.scale(a, 0.37);
        let loss = g.sum(s);
        check_param_gradient(&mut g, x, loss, &format!("mix x (seed {seed})"));
        check_param_gradient(&mut g, y, loss, &format!("mix y (seed {seed})"));
    }
}

/// Relu is checked at inputs bounded away from the kink at 0, where the
/// finite-difference oracle is valid.
#[test]
fn relu_gradient_matches_finite_differences_away_from_kink() {
    for seed in 0..20 {
        let mut r = rng(500 + seed);
        let n = 8;
        let data: Vec<f64> = (0..n)
            .map(|_| {
                let sign = if r.gen_bool(0.5) { 1.0 } else { -1.0 };
                sign * r.gen_range(0.05..2.0)
            })
            .collect();
        let mut g = Graph::new();
        let x = g.parameter(Tensor::new(&[n], data).unwrap());
        let y = g.relu(x);
        let sq = g.mul(y, y);
        let loss = g.sum(sq);
        check_param_gradient(&mut g, x, loss, &format!("relu (seed {seed})"));
    }
}

/// Maxpool is checked where window maxima have clear margins, so the argmax
/// selection is stable under the finite-difference probes.
#[test]
fn maxpool_gradient_matches_finite_differences() {
    for seed in 0..20 {
        let mut r = rng(600 + seed);
        // Distinct magnitudes per window cell keep maxima separated by ≫ h.
        let mut data = Vec::new();
        for _ in 0..(2 * 6 * 6) {
            data.push(r.gen_range(-1.0..1.0));
        }
        let mut g = Graph::new();
        let x = g.parameter(Tensor::new(&[1, 2, 6, 6], data).unwrap());
        let p = g.maxpool2(x);
        let t = g.tanh(p);
        let loss = g.sum(t);
        check_param_gradient(&mut g, x, loss, &format!("maxpool (seed {seed})"));
    }
}

#[test]
fn softmax_cross_entropy_gradient_matches_finite_differences() {
    for seed in 0..20 {
        let mut r = rng(700 + seed);
        let (bsz, classes) = (4, 6);
        let labels: Vec<f64> = (0..bsz).map(|_| r.gen_range(0..classes) as f64).collect();
        let mut g = Graph::new();
        let logits = g.parameter(random_tensor(&[bsz, classes], &mut r, -2.0, 2.0));
        let lab = g.constant(Tensor::new(&[bsz], labels).unwrap());
        let loss = g.softmax_cross_entropy(logits, lab);
        check_param_gradient(&mut g, logits, loss, &format!("softmax_ce (seed {seed})"));
    }
}

#[test]
fn matmul_identity_passes_through() {
    let mut r = rng(1);
    let a = random_tensor(&[3, 3], &mut r, -5.0, 5.0);
    let eye = Tensor::new(&[3, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
    let mut g = Graph::new();
    let i = g.constant(eye);
    let m = g.constant(a.clone());
    let out = g.matmul(i, m);
    let fwd = g.evaluate(&[]).unwrap();
    assert_eq!(fwd.value(out).data(), a.data());
}

#[test]
fn tanh_of_zero_is_zero() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::zeros(&[7]));
    let y = g.tanh(x);
    let fwd = g.evaluate(&[]).unwrap();
    assert_eq!(fwd.value(y).data(), &[0.0; 7]);
}

#[test]
fn uniform_softmax_cross_entropy_is_ln_10() {
    for label in [0.0, 3.0, 9.0] {
        let mut g = Graph::new();
        let logits = g.constant(Tensor::zeros(&[1, 10]));
        let lab = g.constant(Tensor::new(&[1], vec![label]).unwrap());
        let loss = g.softmax_cross_entropy(logits, lab);
        let fwd = g.evaluate(&[]).unwrap();
        let v = fwd.value(loss).scalar_value().unwrap();
        assert!((v - 10.0_f64.ln()).abs() < 1e-12, "got {v}");
    }
}

#[test]
fn softmax_cross_entropy_gradient_is_softmax_minus_onehot() {
    let mut r = rng(2);
    let logits_t = random_tensor(&[1, 5], &mut r, -1.0, 1.0);
    let label = 3usize;
    let mut g = Graph::new();
    let logits = g.parameter(logits_t.clone());
    let lab = g.constant(Tensor::new(&[1], vec![label as f64]).unwrap());
    let loss = g.softmax_cross_entropy(logits, lab);
    let fwd = g.evaluate(&[]).unwrap();
    let grads = g.backward(&fwd, loss).unwrap();
    let got = grads.grad(logits).unwrap();

    let sm = qt_diffcore::ops::softmax_rows(&logits_t).unwrap();
    let mut expected = sm.data().to_vec();
    expected[label] -= 1.0;
    assert_close(got.data(), &expected, 1e-12, 1e-15, "softmax-onehot");
}

#[test]
fn backward_is_linear_in_the_loss() {
    let (a, b) = (2.5, -0.75);
    let mut r = rng(3);
    let mut g = Graph::new();
    let x = g.parameter(random_tensor(&[5], &mut r, -1.0, 1.0));
    let t = g.tanh(x);
    let f = g.sum(t); // f = sum(tanh(x))
    let m = g.mul(x, x);
    let h = g.sum(m); // g = sum(x²)
    let fa = g.scale(f, a);
    let hb = g.scale(h, b);
    let combined = g.add(fa, hb);

    let fwd = g.evaluate(&[]).unwrap();
    let grad_f = g.backward(&fwd, f).unwrap().grad(x).unwrap().clone();
    let grad_h = g.backward(&fwd, h).unwrap().grad(x).unwrap().clone();
    let grad_c = g.backward(&fwd, combined).unwrap().grad(x).unwrap().clone();

    let expected: Vec<f64> = grad_f
        .data()
        .iter()
        .zip(grad_h.data())
        .map(|(df, dh)| a * df + b * dh)
        .collect();
    assert_close(grad_c.data(), &expected, 1e-12, 1e-14, "linearity");
}

#[test]
fn evaluation_and_backward_are_bitwise_deterministic() {
    let mut r = rng(4);
    let mut g = Graph::new();
    let x = g.input("x", &[2, 1, 8, 8]);
    let w1 = g.parameter(random_tensor(&[2, 1, 3, 3], &mut r, -0.5, 0.5));
    let c1 = g.conv2d(x, w1, Padding::Valid);
    let t1 = g.tanh(c1);
    let p1 = g.maxpool2(t1);
    let fl = g.flatten(p1);
    let w2 = g.parameter(random_tensor(&[4, 18], &mut r, -0.5, 0.5));
    let d = g.matmul_tb(fl, w2);
    let lab = g.constant(Tensor::new(&[2], vec![1.0, 3.0]).unwrap());
    let loss = g.softmax_cross_entropy(d, lab);

    let images = random_tensor(&[2, 1, 8, 8], &mut r, 0.0, 1.0);
    let f1 = g.evaluate(&[("x", &images)]).unwrap();
    let f2 = g.evaluate(&[("x", &images)]).unwrap();
    assert!(f1.value(loss).bits_eq(f2.value(loss)));
    assert!(f1.value(d).bits_eq(f2.value(d)));

    let g1 = g.backward(&f1, loss).unwrap();
    let g2 = g.backward(&f2, loss).unwrap();
    assert!(g1.grad(w1).unwrap().bits_eq(g2.grad(w1).unwrap()));
    assert!(g1.grad(w2).unwrap().bits_eq(g2.grad(w2).unwrap()));
}

#[test]
fn conv_and_pool_output_shapes_follow_the_arithmetic() {
    for size in 4..=33usize {
        for k in [3usize, 5] {
            if size < k {
                continue;
            }
            let mut g = Graph::new();
            let x = g.constant(Tensor::zeros(&[1, 1, size, size]));
            let w = g.constant(Tensor::zeros(&[1, 1, k, k]));
            let valid = g.conv2d(x, w, Padding::Valid);
            let same = g.conv2d(x, w, Padding::Same);
            let fwd = g.evaluate(&[]).unwrap();
            assert_eq!(
                fwd.value(valid).shape(),
                &[1, 1, size - k + 1, size - k + 1],
                "valid conv size {size} kernel {k}"
            );
            assert_eq!(
                fwd.value(same).shape(),
                &[1, 1, size, size],
                "same conv size {size} kernel {k}"
            );
        }
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(&[1, 1, size, size]));
        let p = g.maxpool2(x);
        let fwd = g.evaluate(&[]).unwrap();
        assert_eq!(
            fwd.value(p).shape(),
            &[1, 1, size / 2, size / 2],
            "maxpool size {size}"
        );
    }
}

/// The spec's end-to-end diffcore oracle: a random two-conv CNN against
/// central finite differences. Smooth activations keep the oracle exact;
/// the relu path is covered by the kink-aware test above.
#[test]
fn random_two_conv_cnn_backward_matches_finite_differences() {
    for seed in 0..20 {
        let mut r = rng(800 + seed);
        let mut g = Graph::new();
        let x = g.constant(random_tensor(&[2, 1, 10, 10], &mut r, 0.0, 1.0));
        let w1 = g.parameter(random_tensor(&[2, 1, 3, 3], &mut r, -0.5, 0.5));
        let b1 = g.parameter(random_tensor(&[2], &mut r, -0.1, 0.1));
        let c1 = g.conv2d(x, w1, Padding::Valid);
        let a1 = g.bias_add(c1, b1);
        let t1 = g.tanh(a1);
        let p1 = g.maxpool2(t1);
        let w2 = g.parameter(random_tensor(&[3, 2, 3, 3], &mut r, -0.5, 0.5));
        let b2 = g.parameter(random_tensor(&[3], &mut r, -0.1, 0.1));
        let c2 = g.conv2d(p1, w2, Padding::Valid);
        let a2 = g.bias_add(c2, b2);
        let t2 = g.tanh(a2);
        let fl = g.flatten(t2);
        let w3 = g.parameter(random_tensor(&[4, 12], &mut r, -0.5, 0.5));
        let d = g.matmul_tb(fl, w3);
        let lab = g.constant(Tensor::new(&[2], vec![1.0, 3.0]).unwrap());
        let loss = g.softmax_cross_entropy(d, lab);

        for (param, name) in [(w1, "w1"), (b1, "b1"), (w2, "w2"), (b2, "b2"), (w3, "w3")] {
            check_param_gradient(&mut g, param, loss, &format!("cnn {name} (seed {seed})"));
        }
    }
}
