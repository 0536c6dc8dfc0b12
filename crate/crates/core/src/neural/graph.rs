use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use super::Tensor;
use crate::error::{Error, Result};
use crate::math;

/// Layer-norm variance epsilon.
pub const LN_EPS: f64 = 1e-8;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Maximum(Var, Var),
    AddBias(Var, Var),
    MulBias(Var, Var),
    ScaleRows(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Sigmoid(Var),
    Tanh(Var),
    Exp(Var),
    LogSigmoid(Var),
    Gelu(Var),
    Silu(Var),
    Abs(Var),
    Recip(Var),
    Reshape(Var),
    Permute(Var, Vec<usize>),
    Concat(Vec<Var>, usize),
    Slice(Var, usize, usize),
    MatMul(Var, Var),
    Bmm(Var, Var),
    OuterAdd(Var, Var),
    HeadwiseLinear(Var, Var),
    CausalConv(Var, Var),
    LayerNorm(Var, Vec<f64>),
    Softmax(Var),
    SumLast(Var),
    Sum(Var),
    Mean(Var),
    Mae(Var, Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Tape of operations recorded in creation order. Reverse creation order is a
/// topological order, so [`Graph::backward`] is a single reverse sweep.
#[derive(Debug, Default, Clone)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    visits: Vec<u32>,
}

fn mismatch(op: &'static str, a: &[usize], b: &[usize]) -> Error {
    Error::ShapeMismatch {
        op,
        left: a.to_vec(),
        right: b.to_vec(),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + math::exp(-x))
    } else {
        let e = math::exp(x);
        e / (1.0 + e)
    }
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -math::ln_1p(math::exp(-x))
    } else {
        x - math::ln_1p(math::exp(x))
    }
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + math::erf(x * FRAC_1_SQRT_2))
}

fn gelu_grad(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + math::erf(x * FRAC_1_SQRT_2));
    let pdf = math::exp(-0.5 * x * x) / math::sqrt(2.0 * PI);
    cdf + x * pdf
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Maps each output offset of a permuted tensor to its input offset.
fn permute_map(shape: &[usize], perm: &[usize]) -> Vec<usize> {
    let rank = shape.len();
    let mut strides = vec![1usize; rank];
    for i in (0..rank.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let n: usize = shape.iter().product();
    let mut map = Vec::with_capacity(n);
    let mut idx = vec![0usize; rank];
    for _ in 0..n {
        map.push(idx.iter().zip(perm).map(|(&i, &p)| i * strides[p]).sum());
        for d in (0..rank).rev() {
            idx[d] += 1;
            if idx[d] < out_shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    map
}

fn gbuf<'a>(nodes: &[Node], grads: &'a mut [Option<Vec<f64>>], v: Var) -> Option<&'a mut Vec<f64>> {
    let node = &nodes[v.0];
    if !node.needs_grad {
        return None;
    }
    Some(grads[v.0].get_or_insert_with(|| vec![0.0; node.value.len()]))
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Gradient of the last `backward` loss with respect to `v`, if reached.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// How many times each node was processed by the last `backward` call.
    pub fn visit_counts(&self) -> &[u32] {
        &self.visits
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            value: Tensor::from_parts(shape, data),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(mismatch(op, sa, sb));
        }
        Ok(())
    }

    fn binary(&mut self, name: &'static str, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        self.same_shape(name, a, b)?;
        let data = self.data(a).iter().zip(self.data(b)).map(|(&x, &y)| f(x, y)).collect();
        Ok(self.push(self.shape(a).to_vec(), data, op, &[a, b]))
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let data = self.data(a).iter().map(|&x| f(x)).collect();
        self.push(self.shape(a).to_vec(), data, op, &[a])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("div", a, b, Op::Div(a, b), |x, y| x / y)
    }

    /// Element-wise maximum; ties route the gradient to `a`.
    pub fn maximum(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("maximum", a, b, Op::Maximum(a, b), f64::max)
    }

    fn trailing(&self, name: &'static str, x: Var, b: Var) -> Result<(usize, usize)> {
        let (sx, sb) = (self.shape(x), self.shape(b));
        if sb.len() > sx.len() || sx[sx.len() - sb.len()..] != *sb {
            return Err(mismatch(name, sx, sb));
        }
        let m = self.value(b).len();
        Ok((self.value(x).len() / m.max(1), m))
    }

    /// `x + b` with `b` broadcast over the leading axes of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (_, m) = self.trailing("add_bias", x, b)?;
        let bd = self.data(b);
        let data = self.data(x).iter().enumerate().map(|(i, &v)| v + bd[i % m]).collect();
        Ok(self.push(self.shape(x).to_vec(), data, Op::AddBias(x, b), &[x, b]))
    }

    /// `x * g` with `g` broadcast over the leading axes of `x`.
    pub fn mul_bias(&mut self, x: Var, g: Var) -> Result<Var> {
        let (_, m) = self.trailing("mul_bias", x, g)?;
        let gd = self.data(g);
        let data = self.data(x).iter().enumerate().map(|(i, &v)| v * gd[i % m]).collect();
        Ok(self.push(self.shape(x).to_vec(), data, Op::MulBias(x, g), &[x, g]))
    }

    /// Multiplies every last-axis row of `x` by the matching entry of `r`.
    pub fn scale_rows(&mut self, x: Var, r: Var) -> Result<Var> {
        let sx = self.shape(x);
        if sx.is_empty() || sx[..sx.len() - 1] != *self.shape(r) {
            return Err(mismatch("scale_rows", sx, self.shape(r)));
        }
        let m = self.value(x).last_dim();
        let rd = self.data(r);
        let data = self.data(x).iter().enumerate().map(|(i, &v)| v * rd[i / m]).collect();
        Ok(self.push(sx.to_vec(), data, Op::ScaleRows(x, r), &[x, r]))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, Op::Scale(x, c), |v| v * c)
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, Op::AddScalar(x), |v| v + c)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, Op::Sigmoid(x), sigmoid)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, Op::Tanh(x), math::tanh)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, Op::Exp(x), math::exp)
    }

    pub fn log_sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, Op::LogSigmoid(x), log_sigmoid)
    }

    /// Exact (erf-based) GELU.
    pub fn gelu(&mut self, x: Var) -> Var {
        self.unary(x, Op::Gelu(x), gelu)
    }

    pub fn silu(&mut self, x: Var) -> Var {
        self.unary(x, Op::Silu(x), |v| v * sigmoid(v))
    }

    pub fn abs(&mut self, x: Var) -> Var {
        self.unary(x, Op::Abs(x), f64::abs)
    }

    pub fn recip(&mut self, x: Var) -> Var {
        self.unary(x, Op::Recip(x), |v| 1.0 / v)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        if shape.iter().product::<usize>() != self.value(x).len() {
            return Err(mismatch("reshape", self.shape(x), shape));
        }
        let data = self.data(x).to_vec();
        Ok(self.push(shape.to_vec(), data, Op::Reshape(x), &[x]))
    }

    /// Reorders axes: output axis `i` is input axis `perm[i]`.
    pub fn permute(&mut self, x: Var, perm: &[usize]) -> Result<Var> {
        let shape = self.shape(x);
        let mut seen = vec![false; shape.len()];
        if perm.len() != shape.len() || perm.iter().any(|&p| p >= shape.len() || core::mem::replace(&mut seen[p], true)) {
            return Err(mismatch("permute", shape, perm));
        }
        let out_shape = perm.iter().map(|&p| shape[p]).collect();
        let src = self.data(x);
        let data = permute_map(shape, perm).into_iter().map(|i| src[i]).collect();
        Ok(self.push(out_shape, data, Op::Permute(x, perm.to_vec()), &[x]))
    }

    /// Swaps the last two axes.
    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let r = self.shape(x).len();
        if r < 2 {
            return Err(mismatch("transpose", self.shape(x), &[]));
        }
        let mut perm: Vec<usize> = (0..r).collect();
        perm.swap(r - 1, r - 2);
        self.permute(x, &perm)
    }

    fn outer_inner(shape: &[usize], axis: usize) -> (usize, usize) {
        (shape[..axis].iter().product(), shape[axis + 1..].iter().product())
    }

    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        let first = self.shape(*xs.first().ok_or_else(|| mismatch("concat", &[], &[]))?).to_vec();
        if axis >= first.len() {
            return Err(mismatch("concat", &first, &[axis]));
        }
        let mut total = 0;
        for &v in xs {
            let s = self.shape(v);
            if s.len() != first.len() || s.iter().enumerate().any(|(i, &d)| i != axis && d != first[i]) {
                return Err(mismatch("concat", &first, s));
            }
            total += s[axis];
        }
        let (outer, inner) = Self::outer_inner(&first, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in xs {
                let chunk = self.shape(v)[axis] * inner;
                data.extend_from_slice(&self.data(v)[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = first;
        shape[axis] = total;
        Ok(self.push(shape, data, Op::Concat(xs.to_vec(), axis), xs))
    }

    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if axis >= s.len() || start + len > s[axis] {
            return Err(mismatch("slice", &s, &[axis, start, len]));
        }
        let (outer, inner) = Self::outer_inner(&s, axis);
        let src = self.data(x);
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * s[axis] + start) * inner;
            data.extend_from_slice(&src[base..base + len * inner]);
        }
        let mut shape = s;
        shape[axis] = len;
        Ok(self.push(shape, data, Op::Slice(x, axis, start), &[x]))
    }

    /// `x [.., k] · w [k, n] -> [.., n]`.
    pub fn matmul(&mut self, x: Var, w: Var) -> Result<Var> {
        let (sx, sw) = (self.shape(x), self.shape(w));
        if sw.len() != 2 || sx.is_empty() || sx[sx.len() - 1] != sw[0] {
            return Err(mismatch("matmul", sx, sw));
        }
        let (k, n) = (sw[0], sw[1]);
        let rows = self.value(x).len() / k.max(1);
        let (xd, wd) = (self.data(x), self.data(w));
        let mut out = vec![0.0; rows * n];
        for r in 0..rows {
            let orow = &mut out[r * n..(r + 1) * n];
            for p in 0..k {
                let a = xd[r * k + p];
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in orow.iter_mut().zip(&wd[p * n..(p + 1) * n]) {
                    *o += a * b;
                }
            }
        }
        let mut shape = sx.to_vec();
        *shape.last_mut().unwrap() = n;
        Ok(self.push(shape, out, Op::MatMul(x, w), &[x, w]))
    }

    /// Batched product `a [.., m, k] · b [.., k, n] -> [.., m, n]` with equal leading axes.
    pub fn bmm(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let r = sa.len();
        if r < 2 || sb.len() != r || sa[..r - 2] != sb[..r - 2] || sa[r - 1] != sb[r - 2] {
            return Err(mismatch("bmm", sa, sb));
        }
        let (m, k, n) = (sa[r - 2], sa[r - 1], sb[r - 1]);
        let batches: usize = sa[..r - 2].iter().product();
        let (ad, bd) = (self.data(a), self.data(b));
        let mut out = vec![0.0; batches * m * n];
        for bt in 0..batches {
            let (ao, bo, oo) = (bt * m * k, bt * k * n, bt * m * n);
            for i in 0..m {
                for p in 0..k {
                    let av = ad[ao + i * k + p];
                    for j in 0..n {
                        out[oo + i * n + j] += av * bd[bo + p * n + j];
                    }
                }
            }
        }
        let mut shape = sa.to_vec();
        shape[r - 1] = n;
        Ok(self.push(shape, out, Op::Bmm(a, b), &[a, b]))
    }

    /// `out[.., i, j] = a[.., i] + b[.., j]`.
    pub fn outer_add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let r = sa.len();
        if r == 0 || sb.len() != r || sa[..r - 1] != sb[..r - 1] {
            return Err(mismatch("outer_add", sa, sb));
        }
        let (s, t) = (sa[r - 1], sb[r - 1]);
        let batches = self.value(a).len() / s.max(1);
        let (ad, bd) = (self.data(a), self.data(b));
        let mut out = Vec::with_capacity(batches * s * t);
        for bt in 0..batches {
            for i in 0..s {
                for j in 0..t {
                    out.push(ad[bt * s + i] + bd[bt * t + j]);
                }
            }
        }
        let mut shape = sa.to_vec();
        shape.push(t);
        Ok(self.push(shape, out, Op::OuterAdd(a, b), &[a, b]))
    }

    /// Block-diagonal projection: `x [.., h·din]` with `w [h, din, dout]` gives `[.., h·dout]`.
    pub fn headwise_linear(&mut self, x: Var, w: Var) -> Result<Var> {
        let (sx, sw) = (self.shape(x), self.shape(w));
        if sw.len() != 3 || sx.is_empty() || sx[sx.len() - 1] != sw[0] * sw[1] {
            return Err(mismatch("headwise_linear", sx, sw));
        }
        let (h, di, dout) = (sw[0], sw[1], sw[2]);
        let rows = self.value(x).len() / (h * di).max(1);
        let (xd, wd) = (self.data(x), self.data(w));
        let mut out = vec![0.0; rows * h * dout];
        for r in 0..rows {
            for hh in 0..h {
                for i in 0..di {
                    let a = xd[r * h * di + hh * di + i];
                    let wrow = &wd[(hh * di + i) * dout..(hh * di + i + 1) * dout];
                    let orow = &mut out[r * h * dout + hh * dout..r * h * dout + (hh + 1) * dout];
                    for (o, &b) in orow.iter_mut().zip(wrow) {
                        *o += a * b;
                    }
                }
            }
        }
        let mut shape = sx.to_vec();
        *shape.last_mut().unwrap() = h * dout;
        Ok(self.push(shape, out, Op::HeadwiseLinear(x, w), &[x, w]))
    }

    /// Causal depthwise convolution along the time axis of `x [.., t, c]` with
    /// kernel `w [k, c]`; position `t` sees inputs `t-k+1 ..= t` (zero padded).
    pub fn causal_conv(&mut self, x: Var, w: Var) -> Result<Var> {
        let (sx, sw) = (self.shape(x), self.shape(w));
        let r = sx.len();
        if r < 2 || sw.len() != 2 || sw[1] != sx[r - 1] {
            return Err(mismatch("causal_conv", sx, sw));
        }
        let (t, c, k) = (sx[r - 2], sx[r - 1], sw[0]);
        let batches = self.value(x).len() / (t * c).max(1);
        let (xd, wd) = (self.data(x), self.data(w));
        let mut out = vec![0.0; xd.len()];
        for b in 0..batches {
            for ti in 0..t {
                for ki in 0..k {
                    let Some(src) = (ti + ki + 1).checked_sub(k) else { continue };
                    for ch in 0..c {
                        out[(b * t + ti) * c + ch] += wd[ki * c + ch] * xd[(b * t + src) * c + ch];
                    }
                }
            }
        }
        Ok(self.push(sx.to_vec(), out, Op::CausalConv(x, w), &[x, w]))
    }

    /// Normalizes every last-axis row to zero mean and unit variance.
    pub fn layer_norm(&mut self, x: Var) -> Var {
        let m = self.value(x).last_dim();
        let xd = self.data(x);
        let rows = xd.len() / m.max(1);
        let mut out = Vec::with_capacity(xd.len());
        let mut inv = Vec::with_capacity(rows);
        for row in xd.chunks(m) {
            let mean = row.iter().sum::<f64>() / m as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
            let s = 1.0 / math::sqrt(var + LN_EPS);
            inv.push(s);
            out.extend(row.iter().map(|v| (v - mean) * s));
        }
        let shape = self.shape(x).to_vec();
        self.push(shape, out, Op::LayerNorm(x, inv), &[x])
    }

    pub fn softmax(&mut self, x: Var) -> Var {
        let m = self.value(x).last_dim();
        let mut out = Vec::with_capacity(self.value(x).len());
        for row in self.data(x).chunks(m) {
            let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let start = out.len();
            out.extend(row.iter().map(|v| math::exp(v - mx)));
            let z: f64 = out[start..].iter().sum();
            out[start..].iter_mut().for_each(|v| *v /= z);
        }
        let shape = self.shape(x).to_vec();
        self.push(shape, out, Op::Softmax(x), &[x])
    }

    /// Sum over the last axis, dropping it.
    pub fn sum_last(&mut self, x: Var) -> Var {
        let m = self.value(x).last_dim();
        let data = self.data(x).chunks(m).map(|r| r.iter().sum()).collect();
        let s = self.shape(x);
        let shape = s[..s.len().saturating_sub(1)].to_vec();
        self.push(shape, data, Op::SumLast(x), &[x])
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.data(x).iter().sum();
        self.push(Vec::new(), vec![s], Op::Sum(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let d = self.data(x);
        let s = d.iter().sum::<f64>() / d.len() as f64;
        self.push(Vec::new(), vec![s], Op::Mean(x), &[x])
    }

    /// Mean absolute error between same-shaped tensors.
    pub fn mae(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.same_shape("mae", pred, target)?;
        let (p, t) = (self.data(pred), self.data(target));
        let s = p.iter().zip(t).map(|(a, b)| (a - b).abs()).sum::<f64>() / p.len() as f64;
        Ok(self.push(Vec::new(), vec![s], Op::Mae(pred, target), &[pred, target]))
    }

    /// Reverse sweep from a scalar `loss`, filling gradients of every node
    /// that depends on a trainable leaf.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let lv = &self.nodes[loss.0].value;
        if lv.len() != 1 {
            return Err(Error::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        self.visits = vec![0; self.nodes.len()];
        if self.nodes[loss.0].needs_grad {
            grads[loss.0] = Some(vec![1.0]);
        }
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.visits[i] += 1;
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes[..];
        let y = nodes[i].value.data();
        let val = |v: Var| nodes[v.0].value.data();
        let each = |grads: &mut [Option<Vec<f64>>], v: Var, f: &dyn Fn(usize) -> f64| {
            if let Some(buf) = gbuf(nodes, grads, v) {
                for (j, b) in buf.iter_mut().enumerate() {
                    *b += f(j);
                }
            }
        };
        match &nodes[i].op {
            Op::Leaf => {}
            &Op::Add(a, b) => {
                each(grads, a, &|j| g[j]);
                each(grads, b, &|j| g[j]);
            }
            &Op::Sub(a, b) => {
                each(grads, a, &|j| g[j]);
                each(grads, b, &|j| -g[j]);
            }
            &Op::Mul(a, b) => {
                let (ad, bd) = (val(a), val(b));
                each(grads, a, &|j| g[j] * bd[j]);
                each(grads, b, &|j| g[j] * ad[j]);
            }
            &Op::Div(a, b) => {
                let (ad, bd) = (val(a), val(b));
                each(grads, a, &|j| g[j] / bd[j]);
                each(grads, b, &|j| -g[j] * ad[j] / (bd[j] * bd[j]));
            }
            &Op::Maximum(a, b) => {
                let (ad, bd) = (val(a), val(b));
                each(grads, a, &|j| if ad[j] >= bd[j] { g[j] } else { 0.0 });
                each(grads, b, &|j| if ad[j] >= bd[j] { 0.0 } else { g[j] });
            }
            &Op::AddBias(x, b) => {
                each(grads, x, &|j| g[j]);
                if let Some(buf) = gbuf(nodes, grads, b) {
                    let m = buf.len();
                    for (j, gv) in g.iter().enumerate() {
                        buf[j % m] += gv;
                    }
                }
            }
            &Op::MulBias(x, s) => {
                let (xd, sd) = (val(x), val(s));
                let m = sd.len();
                each(grads, x, &|j| g[j] * sd[j % m]);
                if let Some(buf) = gbuf(nodes, grads, s) {
                    for (j, gv) in g.iter().enumerate() {
                        buf[j % m] += gv * xd[j];
                    }
                }
            }
            &Op::ScaleRows(x, r) => {
                let (xd, rd) = (val(x), val(r));
                let m = nodes[x.0].value.last_dim();
                each(grads, x, &|j| g[j] * rd[j / m]);
                if let Some(buf) = gbuf(nodes, grads, r) {
                    for (j, gv) in g.iter().enumerate() {
                        buf[j / m] += gv * xd[j];
                    }
                }
            }
            &Op::Scale(x, c) => each(grads, x, &|j| g[j] * c),
            &Op::AddScalar(x) => each(grads, x, &|j| g[j]),
            &Op::Sigmoid(x) => each(grads, x, &|j| g[j] * y[j] * (1.0 - y[j])),
            &Op::Tanh(x) => each(grads, x, &|j| g[j] * (1.0 - y[j] * y[j])),
            &Op::Exp(x) => each(grads, x, &|j| g[j] * y[j]),
            &Op::LogSigmoid(x) => {
                let xd = val(x);
                each(grads, x, &|j| g[j] * sigmoid(-xd[j]))
            }
            &Op::Gelu(x) => {
                let xd = val(x);
                each(grads, x, &|j| g[j] * gelu_grad(xd[j]))
            }
            &Op::Silu(x) => {
                let xd = val(x);
                each(grads, x, &|j| {
                    let s = sigmoid(xd[j]);
                    g[j] * s * (1.0 + xd[j] * (1.0 - s))
                })
            }
            &Op::Abs(x) => {
                let xd = val(x);
                each(grads, x, &|j| g[j] * sign(xd[j]))
            }
            &Op::Recip(x) => each(grads, x, &|j| -g[j] * y[j] * y[j]),
            &Op::Reshape(x) => each(grads, x, &|j| g[j]),
            Op::Permute(x, perm) => {
                if let Some(buf) = gbuf(nodes, grads, *x) {
                    for (o, src) in permute_map(nodes[x.0].value.shape(), perm).into_iter().enumerate() {
                        buf[src] += g[o];
                    }
                }
            }
            Op::Concat(xs, axis) => {
                let shape = nodes[i].value.shape();
                let (outer, inner) = Self::outer_inner(shape, *axis);
                let mut offset = 0;
                for &v in xs {
                    let chunk = nodes[v.0].value.shape()[*axis] * inner;
                    if let Some(buf) = gbuf(nodes, grads, v) {
                        for o in 0..outer {
                            let src = o * shape[*axis] * inner + offset;
                            for (b, gv) in buf[o * chunk..(o + 1) * chunk].iter_mut().zip(&g[src..src + chunk]) {
                                *b += gv;
                            }
                        }
                    }
                    offset += chunk;
                }
            }
            &Op::Slice(x, axis, start) => {
                let s = nodes[x.0].value.shape();
                let len = nodes[i].value.shape()[axis];
                let (outer, inner) = Self::outer_inner(s, axis);
                if let Some(buf) = gbuf(nodes, grads, x) {
                    for o in 0..outer {
                        let base = (o * s[axis] + start) * inner;
                        let gs = &g[o * len * inner..(o + 1) * len * inner];
                        for (b, gv) in buf[base..base + len * inner].iter_mut().zip(gs) {
                            *b += gv;
                        }
                    }
                }
            }
            &Op::MatMul(x, w) => {
                let (k, n) = (nodes[w.0].value.shape()[0], nodes[w.0].value.shape()[1]);
                let (xd, wd) = (val(x), val(w));
                let rows = xd.len() / k.max(1);
                if let Some(buf) = gbuf(nodes, grads, x) {
                    for r in 0..rows {
                        let grow = &g[r * n..(r + 1) * n];
                        for p in 0..k {
                            let wrow = &wd[p * n..(p + 1) * n];
                            buf[r * k + p] += grow.iter().zip(wrow).map(|(a, b)| a * b).sum::<f64>();
                        }
                    }
                }
                if let Some(buf) = gbuf(nodes, grads, w) {
                    for r in 0..rows {
                        let grow = &g[r * n..(r + 1) * n];
                        for p in 0..k {
                            let a = xd[r * k + p];
                            if a == 0.0 {
                                continue;
                            }
                            for (b, gv) in buf[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *b += a * gv;
                            }
                        }
                    }
                }
            }
            &Op::Bmm(a, b) => {
                let sa = nodes[a.0].value.shape();
                let r = sa.len();
                let (m, k) = (sa[r - 2], sa[r - 1]);
                let n = nodes[b.0].value.shape()[r - 1];
                let batches: usize = sa[..r - 2].iter().product();
                let (ad, bd) = (val(a), val(b));
                if let Some(buf) = gbuf(nodes, grads, a) {
                    for bt in 0..batches {
                        for ii in 0..m {
                            for p in 0..k {
                                let mut s = 0.0;
                                for j in 0..n {
                                    s += g[bt * m * n + ii * n + j] * bd[bt * k * n + p * n + j];
                                }
                                buf[bt * m * k + ii * k + p] += s;
                            }
                        }
                    }
                }
                if let Some(buf) = gbuf(nodes, grads, b) {
                    for bt in 0..batches {
                        for ii in 0..m {
                            for p in 0..k {
                                let av = ad[bt * m * k + ii * k + p];
                                for j in 0..n {
                                    buf[bt * k * n + p * n + j] += av * g[bt * m * n + ii * n + j];
                                }
                            }
                        }
                    }
                }
            }
            &Op::OuterAdd(a, b) => {
                let s = nodes[a.0].value.last_dim();
                let t = nodes[b.0].value.last_dim();
                if let Some(buf) = gbuf(nodes, grads, a) {
                    for (j, gv) in g.iter().enumerate() {
                        buf[j / t] += gv;
                    }
                }
                if let Some(buf) = gbuf(nodes, grads, b) {
                    for (j, gv) in g.iter().enumerate() {
                        buf[(j / (s * t)) * t + j % t] += gv;
                    }
                }
            }
            &Op::HeadwiseLinear(x, w) => {
                let sw = nodes[w.0].value.shape();
                let (h, di, dout) = (sw[0], sw[1], sw[2]);
                let (xd, wd) = (val(x), val(w));
                let rows = xd.len() / (h * di).max(1);
                if let Some(buf) = gbuf(nodes, grads, x) {
                    for r in 0..rows {
                        for hh in 0..h {
                            let grow = &g[r * h * dout + hh * dout..r * h * dout + (hh + 1) * dout];
                            for ii in 0..di {
                                let wrow = &wd[(hh * di + ii) * dout..(hh * di + ii + 1) * dout];
                                buf[r * h * di + hh * di + ii] += grow.iter().zip(wrow).map(|(a, b)| a * b).sum::<f64>();
                            }
                        }
                    }
                }
                if let Some(buf) = gbuf(nodes, grads, w) {
                    for r in 0..rows {
                        for hh in 0..h {
                            let grow = &g[r * h * dout + hh * dout..r * h * dout + (hh + 1) * dout];
                            for ii in 0..di {
                                let a = xd[r * h * di + hh * di + ii];
                                for (b, gv) in buf[(hh * di + ii) * dout..(hh * di + ii + 1) * dout].iter_mut().zip(grow) {
                                    *b += a * gv;
                                }
                            }
                        }
                    }
                }
            }
            &Op::CausalConv(x, w) => {
                let sx = nodes[x.0].value.shape();
                let r = sx.len();
                let (t, c) = (sx[r - 2], sx[r - 1]);
                let k = nodes[w.0].value.shape()[0];
                let (xd, wd) = (val(x), val(w));
                let batches = xd.len() / (t * c).max(1);
                let taps = |f: &mut dyn FnMut(usize, usize, usize)| {
                    for b in 0..batches {
                        for ti in 0..t {
                            for ki in 0..k {
                                let Some(src) = (ti + ki + 1).checked_sub(k) else { continue };
                                for ch in 0..c {
                                    f((b * t + ti) * c + ch, ki * c + ch, (b * t + src) * c + ch);
                                }
                            }
                        }
                    }
                };
                if let Some(buf) = gbuf(nodes, grads, x) {
                    taps(&mut |o, wi, xi| buf[xi] += g[o] * wd[wi]);
                }
                if let Some(buf) = gbuf(nodes, grads, w) {
                    taps(&mut |o, wi, xi| buf[wi] += g[o] * xd[xi]);
                }
            }
            Op::LayerNorm(x, inv) => {
                let m = nodes[i].value.last_dim();
                if let Some(buf) = gbuf(nodes, grads, *x) {
                    for (row, s) in inv.iter().enumerate() {
                        let range = row * m..(row + 1) * m;
                        let (gr, yr) = (&g[range.clone()], &y[range.clone()]);
                        let gm = gr.iter().sum::<f64>() / m as f64;
                        let gym = gr.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / m as f64;
                        for (j, b) in buf[range].iter_mut().enumerate() {
                            *b += s * (gr[j] - gm - yr[j] * gym);
                        }
                    }
                }
            }
            &Op::Softmax(x) => {
                let m = nodes[i].value.last_dim();
                if let Some(buf) = gbuf(nodes, grads, x) {
                    for row in 0..y.len() / m {
                        let range = row * m..(row + 1) * m;
                        let dot: f64 = g[range.clone()].iter().zip(&y[range.clone()]).map(|(a, b)| a * b).sum();
                        for j in range {
                            buf[j] += y[j] * (g[j] - dot);
                        }
                    }
                }
            }
            &Op::SumLast(x) => {
                let m = nodes[x.0].value.last_dim();
                each(grads, x, &|j| g[j / m])
            }
            &Op::Sum(x) => each(grads, x, &|_| g[0]),
            &Op::Mean(x) => {
                let n = nodes[x.0].value.len() as f64;
                each(grads, x, &|_| g[0] / n)
            }
            &Op::Mae(p, t) => {
                let (pd, td) = (val(p), val(t));
                let n = pd.len() as f64;
                each(grads, p, &|j| g[0] * sign(pd[j] - td[j]) / n);
                each(grads, t, &|j| -g[0] * sign(pd[j] - td[j]) / n);
            }
        }
    }
}
