mod common;

use common::{check_primitive, gradient_check, primitive_cases, random_tensor, weighted_sum};
use ecload_core::neural::{adam_step, AdamState, Graph, ParamSet, Tensor};
use ecload_core::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn softmax_of_equal_logits_is_uniform() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::vector(vec![0.0, 0.0, 0.0]));
    let y = g.softmax(x);
    for v in g.value(y).data() {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn mae_direct() {
    let mut g = Graph::new();
    let y = g.constant(Tensor::vector(vec![2.0, 2.0]));
    let p = g.constant(Tensor::vector(vec![1.0, 3.0]));
    let l = g.mae(p, y).unwrap();
    assert_eq!(g.value(l).item(), Some(1.0));
}

#[test]
fn layer_norm_standardizes() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::vector(vec![1.0, 2.0, 3.0]));
    let y = g.layer_norm(x);
    let d = g.value(y).data();
    let mean = d.iter().sum::<f64>() / 3.0;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 3.0;
    assert!(mean.abs() < 1e-6);
    assert!((var - 1.0).abs() < 1e-6, "variance {var}");
}

#[test]
fn square_gradient() {
    let mut g = Graph::new();
    let x = g.param(Tensor::scalar(3.0));
    let l = g.mul(x, x).unwrap();
    g.backward(l).unwrap();
    assert_eq!(g.grad(x), Some(&[6.0][..]));
}

#[test]
fn sigmoid_gradient_at_zero() {
    let mut g = Graph::new();
    let x = g.param(Tensor::scalar(0.0));
    let l = g.sigmoid(x);
    g.backward(l).unwrap();
    assert_eq!(g.grad(x), Some(&[0.25][..]));
}

#[test]
fn backward_rejects_non_scalar() {
    let mut g = Graph::new();
    let x = g.param(Tensor::vector(vec![1.0, 2.0]));
    let y = g.tanh(x);
    assert_eq!(g.backward(y), Err(Error::NonScalarLoss(vec![2])));
}

#[test]
fn shape_mismatch_names_both_shapes() {
    let mut g = Graph::new();
    let a = g.constant(Tensor::zeros(&[2, 3]));
    let b = g.constant(Tensor::zeros(&[3, 2]));
    let err = g.add(a, b).unwrap_err();
    assert_eq!(
        err,
        Error::ShapeMismatch {
            op: "add",
            left: vec![2, 3],
            right: vec![3, 2]
        }
    );
    assert!(g.matmul(a, a).is_err());
}

#[test]
fn three_layer_composite_matches_finite_differences() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = vec![
            random_tensor(&mut rng, &[4, 3], -1.0, 1.0),
            random_tensor(&mut rng, &[3, 5], -1.0, 1.0),
            random_tensor(&mut rng, &[5], -1.0, 1.0),
            random_tensor(&mut rng, &[5, 4], -1.0, 1.0),
            random_tensor(&mut rng, &[4, 2], -1.0, 1.0),
            random_tensor(&mut rng, &[4, 2], -1.0, 1.0),
        ];
        let err = gradient_check(&inputs, &|g, v| {
            let h = g.matmul(v[0], v[1]).unwrap();
            let h = g.add_bias(h, v[2]).unwrap();
            let h = g.tanh(h);
            let h = g.matmul(h, v[3]).unwrap();
            let h = g.sigmoid(h);
            let h = g.matmul(h, v[4]).unwrap();
            g.mae(h, v[5]).unwrap()
        });
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn every_primitive_matches_finite_differences() {
    for case in primitive_cases() {
        for seed in 0..3 {
            let err = check_primitive(&case, seed);
            assert!(err < 1e-4, "{} seed {seed}: {err}", case.0);
        }
    }
}

#[test]
fn backward_visits_each_node_once() {
    let mut g = Graph::new();
    let x = g.param(Tensor::vector(vec![0.3, -0.2]));
    let a = g.tanh(x);
    let b = g.mul(a, a).unwrap();
    let c = g.add(b, a).unwrap();
    let d = g.mul(c, x).unwrap();
    let l = g.sum(d);
    g.backward(l).unwrap();
    assert!(g.visit_counts().iter().all(|&n| n == 1));
    assert_eq!(g.visit_counts().len(), g.len());
}

#[test]
fn gradient_flows_only_to_trainable_inputs() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::vector(vec![1.0, 2.0]));
    let w = g.param(Tensor::vector(vec![0.5, 0.5]));
    let y = g.mul(x, w).unwrap();
    let l = g.sum(y);
    g.backward(l).unwrap();
    assert_eq!(g.grad(x), None);
    assert_eq!(g.grad(w), Some(&[1.0, 2.0][..]));
}

fn single(v: f64) -> ParamSet {
    let mut p = ParamSet::new();
    p.push("w", Tensor::vector(vec![v]));
    p
}

#[test]
fn adam_first_step_is_lr() {
    let mut p = single(1.0);
    let mut s = AdamState::new(&p);
    adam_step(&mut p, &[&[1.0]], &mut s, 0.01).unwrap();
    let delta = p.tensor(0).data()[0] - 1.0;
    assert!((delta + 0.01).abs() < 1e-9, "{delta}");
}

#[test]
fn adam_zero_gradient_is_identity() {
    let mut p = single(0.37);
    let mut s = AdamState::new(&p);
    for _ in 0..3 {
        adam_step(&mut p, &[&[0.0]], &mut s, 0.01).unwrap();
    }
    assert_eq!(p.tensor(0).data()[0], 0.37);
}

#[test]
fn adam_matches_scalar_reference() {
    // plain scalar Adam written out step by step
    let (b1, b2, eps, lr, g) = (0.9f64, 0.999f64, 1e-8, 0.005, 0.3);
    let (mut theta, mut m, mut v) = (2.0f64, 0.0f64, 0.0f64);
    for t in 1..=2 {
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let mh = m / (1.0 - b1.powi(t));
        let vh = v / (1.0 - b2.powi(t));
        theta -= lr * mh / (vh.sqrt() + eps);
    }
    let mut p = single(2.0);
    let mut s = AdamState::new(&p);
    adam_step(&mut p, &[&[g]], &mut s, lr).unwrap();
    adam_step(&mut p, &[&[g]], &mut s, lr).unwrap();
    assert!((p.tensor(0).data()[0] - theta).abs() < 1e-12);
    assert_eq!(s.t, 2);
}

#[test]
fn adam_rejects_misaligned_gradients() {
    let mut p = single(1.0);
    let mut s = AdamState::new(&p);
    assert!(adam_step(&mut p, &[&[1.0, 2.0]], &mut s, 0.01).is_err());
}

#[test]
fn checkpoint_round_trip() {
    let mut p = ParamSet::new();
    p.push("a.w", Tensor::new(vec![2, 3], vec![0.1, -2.5, 1e-300, 3.0, 0.0, -0.0]).unwrap());
    p.push("b", Tensor::vector(vec![core::f64::consts::PI]));
    let meta = vec![("family".to_string(), "lstm".to_string())];
    let text = p.to_checkpoint(&meta);
    let (q, m) = ParamSet::from_checkpoint(&text).unwrap();
    assert_eq!(p, q);
    assert_eq!(m, meta);
    assert!(ParamSet::from_checkpoint("a,1,1").is_err());
    assert!(ParamSet::from_checkpoint(&text.replace("2x3", "2x2")).is_err());
}

proptest! {
    #[test]
    fn adam_is_deterministic(w in -5.0f64..5.0, g in -5.0f64..5.0, lr in 1e-4f64..0.1) {
        let run = || {
            let mut p = single(w);
            let mut s = AdamState::new(&p);
            adam_step(&mut p, &[&[g]], &mut s, lr).unwrap();
            adam_step(&mut p, &[&[g * 0.5]], &mut s, lr).unwrap();
            (p, s)
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn matmul_gradient_matches_finite_differences(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = vec![random_tensor(&mut rng, &[3, 4], -1.0, 1.0), random_tensor(&mut rng, &[4, 2], -1.0, 1.0)];
        let err = gradient_check(&inputs, &|g, v| {
            let y = g.matmul(v[0], v[1]).unwrap();
            weighted_sum(g, y, seed)
        });
        prop_assert!(err < 1e-4);
    }
}
