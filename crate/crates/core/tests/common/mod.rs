#![allow(dead_code)]

use ecload_core::neural::{Graph, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-4;

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Builds a scalar from `out` by a fixed random weighting so every output
/// element contributes to the checked gradient.
pub fn weighted_sum(g: &mut Graph, out: Var, seed: u64) -> Var {
    let shape = g.shape(out).to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let w = g.constant(random_tensor(&mut rng, &shape, -1.0, 1.0));
    let prod = g.mul(out, w).unwrap();
    g.sum(prod)
}

/// Relative error `|a - n| / max(|a|, |n|)` over whole gradient vectors;
/// exact zero vectors compare as zero error.
pub fn rel_error(a: &[f64], n: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(n).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nn: f64 = n.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nn);
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Worst relative error between reverse-mode gradients and central finite
/// differences, over every input tensor. `build` must return a scalar.
pub fn gradient_check(inputs: &[Tensor], build: &dyn Fn(&mut Graph, &[Var]) -> Var) -> f64 {
    let (a, n) = gradients(inputs, build);
    a.iter().zip(&n).map(|(a, n)| rel_error(a, n)).fold(0.0, f64::max)
}

/// Relative error over all inputs taken as one concatenated vector.
pub fn gradient_check_joint(inputs: &[Tensor], build: &dyn Fn(&mut Graph, &[Var]) -> Var) -> f64 {
    let (a, n) = gradients(inputs, build);
    rel_error(&a.concat(), &n.concat())
}

/// Reverse-mode and central-difference gradients for every input tensor.
pub fn gradients(inputs: &[Tensor], build: &dyn Fn(&mut Graph, &[Var]) -> Var) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let loss = build(&mut g, &vars);
    g.backward(loss).unwrap();
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| g.grad(v).map(|s| s.to_vec()).unwrap_or_else(|| vec![0.0; t.len()]))
        .collect();
    let eval = |ins: &[Tensor]| {
        let mut g = Graph::new();
        let vars: Vec<Var> = ins.iter().map(|t| g.param(t.clone())).collect();
        let l = build(&mut g, &vars);
        g.value(l).item().unwrap()
    };
    let mut numerics = Vec::with_capacity(inputs.len());
    for (k, t) in inputs.iter().enumerate() {
        let mut numeric = vec![0.0; t.len()];
        for j in 0..t.len() {
            let mut ins = inputs.to_vec();
            ins[k].data_mut()[j] = t.data()[j] + FD_STEP;
            let up = eval(&ins);
            ins[k].data_mut()[j] = t.data()[j] - FD_STEP;
            let down = eval(&ins);
            numeric[j] = (up - down) / (2.0 * FD_STEP);
        }
        numerics.push(numeric);
    }
    (analytic, numerics)
}

pub type OpCase = (&'static str, Vec<Vec<usize>>, (f64, f64), fn(&mut Graph, &[Var]) -> Var);

/// One finite-difference case per differentiable primitive: name, input
/// shapes, sampling range, and the op applied to the inputs.
pub fn primitive_cases() -> Vec<OpCase> {
    vec![
        ("add", vec![vec![3, 4], vec![3, 4]], (-1.0, 1.0), |g, v| g.add(v[0], v[1]).unwrap()),
        ("sub", vec![vec![3, 4], vec![3, 4]], (-1.0, 1.0), |g, v| g.sub(v[0], v[1]).unwrap()),
        ("mul", vec![vec![3, 4], vec![3, 4]], (-1.0, 1.0), |g, v| g.mul(v[0], v[1]).unwrap()),
        ("div", vec![vec![3, 4], vec![3, 4]], (0.5, 2.0), |g, v| g.div(v[0], v[1]).unwrap()),
        ("maximum", vec![vec![3, 4], vec![3, 4]], (-1.0, 1.0), |g, v| g.maximum(v[0], v[1]).unwrap()),
        ("add_bias", vec![vec![2, 3, 4], vec![4]], (-1.0, 1.0), |g, v| g.add_bias(v[0], v[1]).unwrap()),
        ("add_bias_matrix", vec![vec![2, 3, 4], vec![3, 4]], (-1.0, 1.0), |g, v| g.add_bias(v[0], v[1]).unwrap()),
        ("mul_bias", vec![vec![2, 3, 4], vec![4]], (-1.0, 1.0), |g, v| g.mul_bias(v[0], v[1]).unwrap()),
        ("scale_rows", vec![vec![2, 3, 4], vec![2, 3]], (-1.0, 1.0), |g, v| g.scale_rows(v[0], v[1]).unwrap()),
        ("scale", vec![vec![5]], (-1.0, 1.0), |g, v| g.scale(v[0], -2.5)),
        ("add_scalar", vec![vec![5]], (-1.0, 1.0), |g, v| g.add_scalar(v[0], 0.7)),
        ("sigmoid", vec![vec![3, 4]], (-3.0, 3.0), |g, v| g.sigmoid(v[0])),
        ("tanh", vec![vec![3, 4]], (-2.0, 2.0), |g, v| g.tanh(v[0])),
        ("exp", vec![vec![3, 4]], (-2.0, 2.0), |g, v| g.exp(v[0])),
        ("log_sigmoid", vec![vec![3, 4]], (-4.0, 4.0), |g, v| g.log_sigmoid(v[0])),
        ("gelu", vec![vec![3, 4]], (-3.0, 3.0), |g, v| g.gelu(v[0])),
        ("silu", vec![vec![3, 4]], (-3.0, 3.0), |g, v| g.silu(v[0])),
        ("abs", vec![vec![3, 4]], (-1.0, 1.0), |g, v| g.abs(v[0])),
        ("recip", vec![vec![3, 4]], (0.5, 2.0), |g, v| g.recip(v[0])),
        ("reshape", vec![vec![3, 4]], (-1.0, 1.0), |g, v| g.reshape(v[0], &[2, 6]).unwrap()),
        ("permute", vec![vec![2, 3, 4]], (-1.0, 1.0), |g, v| g.permute(v[0], &[2, 0, 1]).unwrap()),
        ("transpose", vec![vec![2, 3, 4]], (-1.0, 1.0), |g, v| g.transpose(v[0]).unwrap()),
        ("concat", vec![vec![2, 3, 4], vec![2, 1, 4], vec![2, 2, 4]], (-1.0, 1.0), |g, v| {
            g.concat(&[v[0], v[1], v[2]], 1).unwrap()
        }),
        ("slice", vec![vec![2, 5, 3]], (-1.0, 1.0), |g, v| g.slice(v[0], 1, 1, 3).unwrap()),
        ("matmul", vec![vec![2, 3, 4], vec![4, 5]], (-1.0, 1.0), |g, v| g.matmul(v[0], v[1]).unwrap()),
        ("bmm", vec![vec![2, 3, 4], vec![2, 4, 2]], (-1.0, 1.0), |g, v| g.bmm(v[0], v[1]).unwrap()),
        ("outer_add", vec![vec![2, 3], vec![2, 4]], (-1.0, 1.0), |g, v| g.outer_add(v[0], v[1]).unwrap()),
        ("headwise_linear", vec![vec![3, 6], vec![2, 3, 4]], (-1.0, 1.0), |g, v| {
            g.headwise_linear(v[0], v[1]).unwrap()
        }),
        ("causal_conv", vec![vec![2, 5, 3], vec![4, 3]], (-1.0, 1.0), |g, v| g.causal_conv(v[0], v[1]).unwrap()),
        ("layer_norm", vec![vec![3, 5]], (-2.0, 2.0), |g, v| g.layer_norm(v[0])),
        ("softmax", vec![vec![3, 5]], (-2.0, 2.0), |g, v| g.softmax(v[0])),
        ("sum_last", vec![vec![3, 5]], (-1.0, 1.0), |g, v| g.sum_last(v[0])),
        ("sum", vec![vec![3, 5]], (-1.0, 1.0), |g, v| g.sum(v[0])),
        ("mean", vec![vec![3, 5]], (-1.0, 1.0), |g, v| g.mean(v[0])),
        ("mae", vec![vec![3, 5], vec![3, 5]], (-1.0, 1.0), |g, v| g.mae(v[0], v[1]).unwrap()),
    ]
}

/// Worst finite-difference error for one primitive case under `seed`.
pub fn check_primitive(case: &OpCase, seed: u64) -> f64 {
    let (_, shapes, (lo, hi), op) = case;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<Tensor> = shapes.iter().map(|s| random_tensor(&mut rng, s, *lo, *hi)).collect();
    let op = *op;
    gradient_check(&inputs, &move |g, v| {
        let out = op(g, v);
        if g.value(out).len() == 1 && g.shape(out).is_empty() {
            out
        } else {
            weighted_sum(g, out, seed)
        }
    })
}
