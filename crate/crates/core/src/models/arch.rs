//! Parameter layouts and batched forward passes of the deep forecasters.
//!
//! Every forward maps `x [B, 24, 20]` to `[B, 24, 1]`.
//!
//! * LSTM: stacked (optionally bidirectional) LSTM layers with one bias per
//!   gate (gate order i, f, g, o), then linear dense layers and a one-unit
//!   linear output, all applied per hour.
//! * Transformer: linear input projection, sinusoidal positional encoding,
//!   post-norm encoder layers without biases (layer norms carry a gain only),
//!   GELU feed-forward, linear output.
//! * xLSTM: linear projection, learned positional encoding, a stack of mLSTM
//!   and sLSTM residual blocks, final layer norm, linear output.
//!
//! The xLSTM cells follow the reference formulation:
//!
//! mLSTM (parallel form over the day): with `F_i = Σ_{l≤i} log σ(f̃_l)`,
//! `log D_ij = F_i − F_j + ĩ_j` for `j ≤ i`, `m_i = max_j log D_ij`,
//! `C = (q kᵀ / √dh) ⊙ exp(log D − m)`, `h = C v / max(|Σ_j C_ij|, exp(−m_i))`.
//!
//! sLSTM (recurrent): `m_t = max(ĩ_t, log σ(f̃_t) + m_{t−1})`,
//! `i = exp(ĩ − m_t)`, `f = exp(log σ(f̃) + m_{t−1} − m_t)`,
//! `c_t = f c_{t−1} + i tanh(z̃)`, `n_t = f n_{t−1} + i`, `h_t = σ(õ) c_t / n_t`.
//!
//! In both cells the output is invariant to the stabilizer `m`, so `m` is
//! evaluated as a constant and the gradients stay exact.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::error::{Error, Result};
use crate::features::{HOURS, N_FEATURES};
use crate::math;
use crate::neural::{Graph, ParamSet, Tensor, Var};

/// Kernel width of the causal convolutions in xLSTM blocks.
pub const CONV_KERNEL: usize = 4;
/// Block size of the mLSTM query/key/value projections.
pub const QKV_BLOCK: usize = 4;
const MASK: f64 = -1e30;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmArch {
    /// `(units, bidirectional)` per recurrent layer.
    pub layers: Vec<(usize, bool)>,
    pub dense: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformerArch {
    pub d: usize,
    pub heads: usize,
    pub ff: usize,
    pub layers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct XlstmArch {
    pub blocks: usize,
    pub heads: usize,
    pub d: usize,
    /// Block indices that are sLSTM blocks; the rest are mLSTM blocks.
    pub slstm_at: Vec<usize>,
}

fn round_up(x: usize, multiple: usize) -> usize {
    x.div_ceil(multiple) * multiple
}

impl XlstmArch {
    /// Width of the mLSTM up-projection.
    pub fn inner(&self) -> usize {
        round_up(2 * self.d, 64)
    }

    /// Hidden width of the gated feed-forward after each sLSTM block.
    pub fn ffn(&self) -> usize {
        round_up((13 * self.d).div_ceil(10), 8)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Architecture {
    Lstm(LstmArch),
    Transformer(TransformerArch),
    Xlstm(XlstmArch),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Init {
    /// Uniform in ±1/√fan_in.
    Uniform(usize),
    Ones,
}

struct Slot {
    name: String,
    shape: Vec<usize>,
    init: Init,
}

#[derive(Default)]
struct Layout(Vec<Slot>);

impl Layout {
    fn add(&mut self, name: String, shape: &[usize], init: Init) {
        self.0.push(Slot {
            name,
            shape: shape.to_vec(),
            init,
        });
    }
}

/// Walks bound parameters in layout order.
struct Cursor<'a> {
    vars: &'a [Var],
    next: usize,
}

impl Cursor<'_> {
    fn take(&mut self) -> Var {
        let v = self.vars[self.next];
        self.next += 1;
        v
    }
}

impl Architecture {
    fn layout(&self) -> Layout {
        let mut l = Layout::default();
        match self {
            Architecture::Lstm(a) => {
                let mut width = N_FEATURES;
                for (li, &(u, bi)) in a.layers.iter().enumerate() {
                    let dirs: &[&str] = if bi { &["fw", "bw"] } else { &["fw"] };
                    for dir in dirs {
                        l.add(format!("lstm{li}.{dir}.w"), &[width, 4 * u], Init::Uniform(width));
                        l.add(format!("lstm{li}.{dir}.u"), &[u, 4 * u], Init::Uniform(u));
                        l.add(format!("lstm{li}.{dir}.b"), &[4 * u], Init::Uniform(width));
                    }
                    width = if bi { 2 * u } else { u };
                }
                for (di, &n) in a.dense.iter().enumerate() {
                    l.add(format!("dense{di}.w"), &[width, n], Init::Uniform(width));
                    l.add(format!("dense{di}.b"), &[n], Init::Uniform(width));
                    width = n;
                }
                l.add("out.w".into(), &[width, 1], Init::Uniform(width));
                l.add("out.b".into(), &[1], Init::Uniform(width));
            }
            Architecture::Transformer(a) => {
                let d = a.d;
                l.add("proj.w".into(), &[N_FEATURES, d], Init::Uniform(N_FEATURES));
                l.add("proj.b".into(), &[d], Init::Uniform(N_FEATURES));
                for li in 0..a.layers {
                    for m in ["q", "k", "v", "o"] {
                        l.add(format!("enc{li}.attn.{m}"), &[d, d], Init::Uniform(d));
                    }
                    l.add(format!("enc{li}.ln1"), &[d], Init::Ones);
                    l.add(format!("enc{li}.ff1"), &[d, a.ff], Init::Uniform(d));
                    l.add(format!("enc{li}.ff2"), &[a.ff, d], Init::Uniform(a.ff));
                    l.add(format!("enc{li}.ln2"), &[d], Init::Ones);
                }
                l.add("out.w".into(), &[d, 1], Init::Uniform(d));
                l.add("out.b".into(), &[1], Init::Uniform(d));
            }
            Architecture::Xlstm(a) => {
                let (d, h) = (a.d, a.heads);
                l.add("proj.w".into(), &[N_FEATURES, d], Init::Uniform(N_FEATURES));
                l.add("proj.b".into(), &[d], Init::Uniform(N_FEATURES));
                l.add("pos".into(), &[HOURS, d], Init::Uniform(d));
                for bi in 0..a.blocks {
                    let p = format!("block{bi}");
                    if a.slstm_at.contains(&bi) {
                        let hd = d / h;
                        l.add(format!("{p}.ln"), &[d], Init::Ones);
                        l.add(format!("{p}.conv.w"), &[CONV_KERNEL, d], Init::Uniform(CONV_KERNEL));
                        l.add(format!("{p}.conv.b"), &[d], Init::Uniform(CONV_KERNEL));
                        for gate in ["i", "f", "z", "o"] {
                            l.add(format!("{p}.w{gate}"), &[h, hd, hd], Init::Uniform(hd));
                        }
                        for gate in ["i", "f", "z", "o"] {
                            l.add(format!("{p}.r{gate}"), &[h, hd, hd], Init::Uniform(hd));
                        }
                        for gate in ["i", "f", "z", "o"] {
                            l.add(format!("{p}.b{gate}"), &[d], Init::Uniform(hd));
                        }
                        l.add(format!("{p}.gn"), &[d], Init::Ones);
                        let f = a.ffn();
                        l.add(format!("{p}.ffn.ln"), &[d], Init::Ones);
                        l.add(format!("{p}.ffn.up"), &[d, 2 * f], Init::Uniform(d));
                        l.add(format!("{p}.ffn.down"), &[f, d], Init::Uniform(f));
                    } else {
                        let inner = a.inner();
                        let nb = inner / QKV_BLOCK;
                        l.add(format!("{p}.ln"), &[d], Init::Ones);
                        l.add(format!("{p}.up"), &[d, 2 * inner], Init::Uniform(d));
                        for m in ["q", "k", "v"] {
                            l.add(format!("{p}.{m}"), &[nb, QKV_BLOCK, QKV_BLOCK], Init::Uniform(QKV_BLOCK));
                        }
                        l.add(format!("{p}.conv.w"), &[CONV_KERNEL, inner], Init::Uniform(CONV_KERNEL));
                        l.add(format!("{p}.conv.b"), &[inner], Init::Uniform(CONV_KERNEL));
                        l.add(format!("{p}.igate.w"), &[3 * inner, h], Init::Uniform(3 * inner));
                        l.add(format!("{p}.igate.b"), &[h], Init::Uniform(3 * inner));
                        l.add(format!("{p}.fgate.w"), &[3 * inner, h], Init::Uniform(3 * inner));
                        l.add(format!("{p}.fgate.b"), &[h], Init::Uniform(3 * inner));
                        l.add(format!("{p}.outnorm"), &[inner], Init::Ones);
                        l.add(format!("{p}.skip"), &[inner], Init::Ones);
                        l.add(format!("{p}.down"), &[inner, d], Init::Uniform(inner));
                    }
                }
                l.add("post_ln".into(), &[d], Init::Ones);
                l.add("out.w".into(), &[d, 1], Init::Uniform(d));
                l.add("out.b".into(), &[1], Init::Uniform(d));
            }
        }
        l
    }

    /// Checks structural constraints (head divisibility, block indices).
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::PresetMismatch(m));
        match self {
            Architecture::Lstm(a) => {
                if a.layers.is_empty() || a.layers.iter().any(|&(u, _)| u == 0) || a.dense.contains(&0) {
                    return bad("LSTM layers and dense widths must be positive".into());
                }
            }
            Architecture::Transformer(a) => {
                if a.d == 0 || a.heads == 0 || a.d % a.heads != 0 || a.ff == 0 {
                    return bad(format!("transformer width {} not divisible into {} heads", a.d, a.heads));
                }
            }
            Architecture::Xlstm(a) => {
                if a.d == 0 || a.heads == 0 || a.d % a.heads != 0 || a.inner() % a.heads != 0 {
                    return bad(format!("xLSTM width {} not divisible into {} heads", a.d, a.heads));
                }
                if a.slstm_at.iter().any(|&b| b >= a.blocks) {
                    return bad("sLSTM block index beyond the stack".into());
                }
            }
        }
        Ok(())
    }

    /// Exact number of trainable scalars.
    pub fn count_params(&self) -> usize {
        self.layout().0.iter().map(|s| s.shape.iter().product::<usize>()).sum()
    }

    /// Seeded initialization: uniform ±1/√fan_in, norm gains and skip weights 1.
    pub fn init_params<R: Rng>(&self, rng: &mut R) -> ParamSet {
        let mut ps = ParamSet::new();
        for slot in self.layout().0 {
            let n: usize = slot.shape.iter().product();
            let data = match slot.init {
                Init::Ones => vec![1.0; n],
                Init::Uniform(fan_in) => {
                    let b = 1.0 / math::sqrt(fan_in.max(1) as f64);
                    (0..n).map(|_| rng.random_range(-b..=b)).collect()
                }
            };
            ps.push(slot.name, Tensor::new(slot.shape, data).expect("layout shape"));
        }
        ps
    }

    /// All-zero parameters with the right layout.
    pub fn zero_params(&self) -> ParamSet {
        let mut ps = ParamSet::new();
        for slot in self.layout().0 {
            ps.push(slot.name, Tensor::zeros(&slot.shape));
        }
        ps
    }

    /// Errors unless `params` has exactly this architecture's names and shapes.
    pub fn check_params(&self, params: &ParamSet) -> Result<()> {
        let layout = self.layout();
        if layout.0.len() != params.len() {
            return Err(Error::PresetMismatch(format!(
                "expected {} tensors, got {}",
                layout.0.len(),
                params.len()
            )));
        }
        for (i, slot) in layout.0.iter().enumerate() {
            if params.name(i) != slot.name || params.tensor(i).shape() != slot.shape.as_slice() {
                return Err(Error::PresetMismatch(format!(
                    "tensor {i}: expected {} {:?}, got {} {:?}",
                    slot.name,
                    slot.shape,
                    params.name(i),
                    params.tensor(i).shape()
                )));
            }
        }
        Ok(())
    }

    /// Forward pass for `x [B, 24, 20]` given parameters bound in layout order.
    pub fn forward(&self, g: &mut Graph, params: &[Var], x: Var) -> Result<Var> {
        let shape = g.shape(x).to_vec();
        if shape.len() != 3 || shape[1] != HOURS || shape[2] != N_FEATURES {
            return Err(Error::ShapeMismatch {
                op: "forward",
                left: shape,
                right: vec![0, HOURS, N_FEATURES],
            });
        }
        let layout = self.layout();
        if params.len() != layout.0.len() {
            return Err(Error::PresetMismatch(format!(
                "expected {} tensors, got {}",
                layout.0.len(),
                params.len()
            )));
        }
        for (v, slot) in params.iter().zip(&layout.0) {
            if g.shape(*v) != slot.shape.as_slice() {
                return Err(Error::PresetMismatch(format!("{}: expected {:?}", slot.name, slot.shape)));
            }
        }
        let mut p = Cursor { vars: params, next: 0 };
        match self {
            Architecture::Lstm(a) => lstm_forward(g, a, &mut p, x),
            Architecture::Transformer(a) => transformer_forward(g, a, &mut p, x),
            Architecture::Xlstm(a) => xlstm_forward(g, a, &mut p, x),
        }
    }
}

fn linear(g: &mut Graph, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
    let y = g.matmul(x, w)?;
    match b {
        Some(b) => g.add_bias(y, b),
        None => Ok(y),
    }
}

/// Layer norm followed by a per-feature gain.
fn norm(g: &mut Graph, x: Var, gain: Var) -> Result<Var> {
    let n = g.layer_norm(x);
    g.mul_bias(n, gain)
}

fn batch_of(g: &Graph, x: Var) -> usize {
    g.shape(x)[0]
}

fn lstm_direction(g: &mut Graph, x: Var, u: usize, reverse: bool, p: &mut Cursor) -> Result<Var> {
    let (w, rw, b) = (p.take(), p.take(), p.take());
    let batch = batch_of(g, x);
    let pre = linear(g, x, w, Some(b))?;
    let mut h: Option<Var> = None;
    let mut c: Option<Var> = None;
    let mut outs = vec![None; HOURS];
    let order: Vec<usize> = if reverse { (0..HOURS).rev().collect() } else { (0..HOURS).collect() };
    for t in order {
        let step = g.slice(pre, 1, t, 1)?;
        let mut z = g.reshape(step, &[batch, 4 * u])?;
        if let Some(h) = h {
            let rec = g.matmul(h, rw)?;
            z = g.add(z, rec)?;
        }
        let zi = g.slice(z, 1, 0, u)?;
        let zf = g.slice(z, 1, u, u)?;
        let zg = g.slice(z, 1, 2 * u, u)?;
        let zo = g.slice(z, 1, 3 * u, u)?;
        let i = g.sigmoid(zi);
        let cand = g.tanh(zg);
        let ic = g.mul(i, cand)?;
        let cn = match c {
            Some(c) => {
                let f = g.sigmoid(zf);
                let fc = g.mul(f, c)?;
                g.add(fc, ic)?
            }
            None => ic,
        };
        let o = g.sigmoid(zo);
        let tc = g.tanh(cn);
        let hn = g.mul(o, tc)?;
        outs[t] = Some(g.reshape(hn, &[batch, 1, u])?);
        h = Some(hn);
        c = Some(cn);
    }
    let outs: Vec<Var> = outs.into_iter().map(|v| v.expect("every hour visited")).collect();
    g.concat(&outs, 1)
}

fn lstm_forward(g: &mut Graph, a: &LstmArch, p: &mut Cursor, x: Var) -> Result<Var> {
    let mut h = x;
    for &(u, bi) in &a.layers {
        let fw = lstm_direction(g, h, u, false, p)?;
        h = if bi {
            let bw = lstm_direction(g, h, u, true, p)?;
            g.concat(&[fw, bw], 2)?
        } else {
            fw
        };
    }
    for _ in &a.dense {
        let (w, b) = (p.take(), p.take());
        h = linear(g, h, w, Some(b))?;
    }
    let (w, b) = (p.take(), p.take());
    linear(g, h, w, Some(b))
}

/// Sinusoidal positional encoding `[24, d]`.
pub fn sinusoidal_encoding(d: usize) -> Tensor {
    let mut data = vec![0.0; HOURS * d];
    for t in 0..HOURS {
        for i in 0..d {
            let pair = (i / 2) as f64 * 2.0;
            let angle = t as f64 / libm::pow(10_000.0, pair / d as f64);
            data[t * d + i] = if i % 2 == 0 { math::sin(angle) } else { math::cos(angle) };
        }
    }
    Tensor::new(vec![HOURS, d], data).expect("encoding shape")
}

/// Splits `[B, T, h·dh]` into `[B, h, T, dh]`.
fn split_heads(g: &mut Graph, x: Var, heads: usize) -> Result<Var> {
    let s = g.shape(x).to_vec();
    let r = g.reshape(x, &[s[0], s[1], heads, s[2] / heads])?;
    g.permute(r, &[0, 2, 1, 3])
}

/// Inverse of [`split_heads`].
fn merge_heads(g: &mut Graph, x: Var) -> Result<Var> {
    let s = g.shape(x).to_vec();
    let p = g.permute(x, &[0, 2, 1, 3])?;
    g.reshape(p, &[s[0], s[2], s[1] * s[3]])
}

fn transformer_forward(g: &mut Graph, a: &TransformerArch, p: &mut Cursor, x: Var) -> Result<Var> {
    let (w, b) = (p.take(), p.take());
    let proj = linear(g, x, w, Some(b))?;
    let pe = g.constant(sinusoidal_encoding(a.d));
    let mut h = g.add_bias(proj, pe)?;
    let dh = a.d / a.heads;
    for _ in 0..a.layers {
        let (wq, wk, wv, wo) = (p.take(), p.take(), p.take(), p.take());
        let (ln1, ff1, ff2, ln2) = (p.take(), p.take(), p.take(), p.take());
        let q = linear(g, h, wq, None)?;
        let k = linear(g, h, wk, None)?;
        let v = linear(g, h, wv, None)?;
        let q = split_heads(g, q, a.heads)?;
        let k = split_heads(g, k, a.heads)?;
        let v = split_heads(g, v, a.heads)?;
        let kt = g.transpose(k)?;
        let scores = g.bmm(q, kt)?;
        let scores = g.scale(scores, 1.0 / math::sqrt(dh as f64));
        let attn = g.softmax(scores);
        let ctx = g.bmm(attn, v)?;
        let ctx = merge_heads(g, ctx)?;
        let out = linear(g, ctx, wo, None)?;
        let res = g.add(h, out)?;
        h = norm(g, res, ln1)?;
        let f = linear(g, h, ff1, None)?;
        let f = g.gelu(f);
        let f = linear(g, f, ff2, None)?;
        let res = g.add(h, f)?;
        h = norm(g, res, ln2)?;
    }
    let (w, b) = (p.take(), p.take());
    linear(g, h, w, Some(b))
}

fn xlstm_forward(g: &mut Graph, a: &XlstmArch, p: &mut Cursor, x: Var) -> Result<Var> {
    let (w, b, pos) = (p.take(), p.take(), p.take());
    let proj = linear(g, x, w, Some(b))?;
    let mut h = g.add_bias(proj, pos)?;
    for bi in 0..a.blocks {
        h = if a.slstm_at.contains(&bi) {
            let h1 = slstm_block(g, a, p, h)?;
            ffn_block(g, p, h1)?
        } else {
            mlstm_block(g, a, p, h)?
        };
    }
    let ln = p.take();
    let h = norm(g, h, ln)?;
    let (w, b) = (p.take(), p.take());
    linear(g, h, w, Some(b))
}

fn conv_silu(g: &mut Graph, x: Var, w: Var, b: Var) -> Result<Var> {
    let c = g.causal_conv(x, w)?;
    let c = g.add_bias(c, b)?;
    Ok(g.silu(c))
}

fn mlstm_block(g: &mut Graph, a: &XlstmArch, p: &mut Cursor, x: Var) -> Result<Var> {
    let (ln, up, wq, wk, wv) = (p.take(), p.take(), p.take(), p.take(), p.take());
    let (cw, cb, iw, ib, fw, fb) = (p.take(), p.take(), p.take(), p.take(), p.take(), p.take());
    let (outnorm, skip, down) = (p.take(), p.take(), p.take());
    let inner = a.inner();
    let (batch, heads) = (batch_of(g, x), a.heads);
    let dh = inner / heads;

    let xn = norm(g, x, ln)?;
    let u = linear(g, xn, up, None)?;
    let xm = g.slice(u, 2, 0, inner)?;
    let z = g.slice(u, 2, inner, inner)?;
    let xc = conv_silu(g, xm, cw, cb)?;
    let q = g.headwise_linear(xc, wq)?;
    let k = g.headwise_linear(xc, wk)?;
    let v = g.headwise_linear(xm, wv)?;
    let gate_in = g.concat(&[q, k, v], 2)?;
    let ig = linear(g, gate_in, iw, Some(ib))?;
    let fg = linear(g, gate_in, fw, Some(fb))?;
    let ig = g.permute(ig, &[0, 2, 1])?;
    let fg = g.permute(fg, &[0, 2, 1])?;

    // cumulative log forget gates via an upper-triangular ones matrix
    let mut tri = vec![0.0; HOURS * HOURS];
    let mut mask = vec![0.0; HOURS * HOURS];
    for l in 0..HOURS {
        for i in 0..HOURS {
            if l <= i {
                tri[l * HOURS + i] = 1.0;
            } else {
                mask[i * HOURS + l] = MASK;
            }
        }
    }
    let tri = g.constant(Tensor::new(vec![HOURS, HOURS], tri)?);
    let mask = g.constant(Tensor::new(vec![HOURS, HOURS], mask)?);
    let logf = g.log_sigmoid(fg);
    let cum = g.matmul(logf, tri)?;
    let col = g.sub(ig, cum)?;
    let logd = g.outer_add(cum, col)?;
    let logd = g.add_bias(logd, mask)?;

    let rows = batch * heads * HOURS;
    let mut m_full = Vec::with_capacity(rows * HOURS);
    let mut floor = Vec::with_capacity(rows);
    for row in g.value(logd).data().chunks(HOURS) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m_full.extend(core::iter::repeat_n(m, HOURS));
        floor.push(math::exp(-m));
    }
    let m_full = g.constant(Tensor::new(vec![batch, heads, HOURS, HOURS], m_full)?);
    let floor = g.constant(Tensor::new(vec![batch, heads, HOURS], floor)?);
    let shifted = g.sub(logd, m_full)?;
    let dmat = g.exp(shifted);

    let qh = split_heads(g, q, heads)?;
    let kh = split_heads(g, k, heads)?;
    let vh = split_heads(g, v, heads)?;
    let kt = g.transpose(kh)?;
    let qk = g.bmm(qh, kt)?;
    let qk = g.scale(qk, 1.0 / math::sqrt(dh as f64));
    let c = g.mul(qk, dmat)?;
    let rs = g.sum_last(c);
    let rs = g.abs(rs);
    let den = g.maximum(rs, floor)?;
    let inv = g.recip(den);
    let cn = g.scale_rows(c, inv)?;
    let hh = g.bmm(cn, vh)?;
    let hh = g.layer_norm(hh);
    let hh = merge_heads(g, hh)?;
    let hh = g.mul_bias(hh, outnorm)?;

    let sk = g.mul_bias(xc, skip)?;
    let hs = g.add(hh, sk)?;
    let gate = g.silu(z);
    let out = g.mul(hs, gate)?;
    let y = linear(g, out, down, None)?;
    g.add(x, y)
}

fn slstm_block(g: &mut Graph, a: &XlstmArch, p: &mut Cursor, x: Var) -> Result<Var> {
    let (ln, cw, cb) = (p.take(), p.take(), p.take());
    let w: Vec<Var> = (0..4).map(|_| p.take()).collect();
    let r: Vec<Var> = (0..4).map(|_| p.take()).collect();
    let b: Vec<Var> = (0..4).map(|_| p.take()).collect();
    let gn = p.take();
    let (batch, d, heads) = (batch_of(g, x), a.d, a.heads);

    let xn = norm(g, x, ln)?;
    let xc = conv_silu(g, xn, cw, cb)?;
    // i and f see the convolved input, z and o the normalized input
    let src = [xc, xc, xn, xn];
    let mut pre = Vec::with_capacity(4);
    for k in 0..4 {
        let y = g.headwise_linear(src[k], w[k])?;
        pre.push(g.add_bias(y, b[k])?);
    }

    let mut h: Option<Var> = None;
    let mut c: Option<Var> = None;
    let mut n: Option<Var> = None;
    let mut m_prev: Vec<f64> = Vec::new();
    let mut outs = Vec::with_capacity(HOURS);
    for t in 0..HOURS {
        let mut raw = [x; 4];
        for k in 0..4 {
            let s = g.slice(pre[k], 1, t, 1)?;
            let mut s = g.reshape(s, &[batch, d])?;
            if let Some(h) = h {
                let rec = g.headwise_linear(h, r[k])?;
                s = g.add(s, rec)?;
            }
            raw[k] = s;
        }
        let [ri, rf, rz, ro] = raw;
        let logf = g.log_sigmoid(rf);
        let (iv, fv) = (g.value(ri).data(), g.value(logf).data());
        let m: Vec<f64> = if t == 0 {
            iv.to_vec()
        } else {
            iv.iter().zip(fv).zip(&m_prev).map(|((i, f), mp)| i.max(f + mp)).collect()
        };
        let mc = g.constant(Tensor::new(vec![batch, d], m.clone())?);
        let ishift = g.sub(ri, mc)?;
        let ig = g.exp(ishift);
        let zt = g.tanh(rz);
        let iz = g.mul(ig, zt)?;
        let (cn, nn) = match (c, n) {
            (Some(c), Some(n)) => {
                let mp = g.constant(Tensor::new(vec![batch, d], m_prev.clone())?);
                let fshift = g.add(logf, mp)?;
                let fshift = g.sub(fshift, mc)?;
                let fg = g.exp(fshift);
                let fc = g.mul(fg, c)?;
                let fn_ = g.mul(fg, n)?;
                (g.add(fc, iz)?, g.add(fn_, ig)?)
            }
            _ => (iz, ig),
        };
        let o = g.sigmoid(ro);
        let ratio = g.div(cn, nn)?;
        let hn = g.mul(o, ratio)?;
        outs.push(g.reshape(hn, &[batch, 1, d])?);
        h = Some(hn);
        c = Some(cn);
        n = Some(nn);
        m_prev = m;
    }
    let seq = g.concat(&outs, 1)?;
    let grouped = g.reshape(seq, &[batch, HOURS, heads, d / heads])?;
    let grouped = g.layer_norm(grouped);
    let seq = g.reshape(grouped, &[batch, HOURS, d])?;
    let seq = g.mul_bias(seq, gn)?;
    g.add(x, seq)
}

fn ffn_block(g: &mut Graph, p: &mut Cursor, x: Var) -> Result<Var> {
    let (ln, up, down) = (p.take(), p.take(), p.take());
    let f = g.shape(down)[0];
    let xn = norm(g, x, ln)?;
    let u = linear(g, xn, up, None)?;
    let gate = g.slice(u, 2, 0, f)?;
    let val = g.slice(u, 2, f, f)?;
    let gate = g.gelu(gate);
    let y = g.mul(gate, val)?;
    let y = linear(g, y, down, None)?;
    g.add(x, y)
}
