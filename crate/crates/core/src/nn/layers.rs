//! Building blocks shared by the encoders, the tokenizer and the generators.

use super::graph::Var;
use super::params::{Ctx, ParamId, ParamStore};
use super::tensor::Tensor;
use crate::rng::Rng;

#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let weight = store.uniform(format!("{name}.weight"), in_dim, out_dim, bound, rng);
        let bias = store.uniform(format!("{name}.bias"), 1, out_dim, bound, rng);
        Self { weight, bias, in_dim, out_dim }
    }

    /// Weight and bias start at exactly zero.
    pub fn zeroed(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize) -> Self {
        let weight = store.zeros(format!("{name}.weight"), in_dim, out_dim);
        let bias = store.zeros(format!("{name}.bias"), 1, out_dim);
        Self { weight, bias, in_dim, out_dim }
    }

    pub fn forward(&self, cx: &Ctx, x: Var) -> Var {
        let y = cx.g.matmul(x, cx.p(self.weight));
        cx.g.add_row(y, cx.p(self.bias))
    }
}

#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        let gamma = store.add(format!("{name}.gamma"), Tensor::full(1, dim, 1.0));
        let beta = store.zeros(format!("{name}.beta"), 1, dim);
        Self { gamma, beta }
    }

    pub fn forward(&self, cx: &Ctx, x: Var) -> Var {
        let n = cx.g.layer_norm(x, 1e-5);
        let s = cx.g.mul_row(n, cx.p(self.gamma));
        cx.g.add_row(s, cx.p(self.beta))
    }
}

#[derive(Clone, Debug)]
pub struct Embedding {
    pub table: ParamId,
    pub count: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new(store: &mut ParamStore, name: &str, count: usize, dim: usize, rng: &mut Rng) -> Self {
        let table = store.normal(format!("{name}.table"), count, dim, 0.3, rng);
        Self { table, count, dim }
    }

    pub fn forward(&self, cx: &Ctx, ids: &[usize]) -> Var {
        cx.g.gather_rows(cx.p(self.table), ids)
    }
}

/// Multi-head scaled dot-product attention with separate query and
/// key/value inputs.
#[derive(Clone, Debug)]
pub struct Attention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub out: Linear,
    pub heads: usize,
}

impl Attention {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, heads: usize, rng: &mut Rng) -> Self {
        assert_eq!(dim % heads, 0, "model width {dim} not divisible by {heads} heads");
        Self {
            query: Linear::new(store, &format!("{name}.q"), dim, dim, rng),
            key: Linear::new(store, &format!("{name}.k"), dim, dim, rng),
            value: Linear::new(store, &format!("{name}.v"), dim, dim, rng),
            out: Linear::new(store, &format!("{name}.o"), dim, dim, rng),
            heads,
        }
    }

    /// `mask` is added to the `n×m` logits of every head; use large negative
    /// entries to block positions.
    pub fn forward(&self, cx: &Ctx, x: Var, context: Var, mask: Option<Var>) -> Var {
        let g = cx.g;
        let q = self.query.forward(cx, x);
        let k = self.key.forward(cx, context);
        let v = self.value.forward(cx, context);
        let dim = g.shape(q).1;
        let hd = dim / self.heads;
        let scale = 1.0 / (hd as f64).sqrt();
        let mut outs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = g.slice_cols(q, h * hd, hd);
            let kh = g.slice_cols(k, h * hd, hd);
            let vh = g.slice_cols(v, h * hd, hd);
            let mut logits = g.scale(g.matmul_t(qh, kh), scale);
            if let Some(m) = mask {
                logits = g.add(logits, m);
            }
            let w = g.softmax(logits);
            outs.push(g.matmul(w, vh));
        }
        let merged = if outs.len() == 1 { outs[0] } else { g.concat_cols(&outs) };
        self.out.forward(cx, merged)
    }
}

#[derive(Clone, Debug)]
pub struct FeedForward {
    pub up: Linear,
    pub down: Linear,
}

impl FeedForward {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, hidden: usize, rng: &mut Rng) -> Self {
        Self {
            up: Linear::new(store, &format!("{name}.up"), dim, hidden, rng),
            down: Linear::new(store, &format!("{name}.down"), hidden, dim, rng),
        }
    }

    pub fn forward(&self, cx: &Ctx, x: Var) -> Var {
        let h = cx.g.gelu(self.up.forward(cx, x));
        self.down.forward(cx, h)
    }
}

/// Pre-norm transformer encoder block.
#[derive(Clone, Debug)]
pub struct TransformerBlock {
    pub norm1: LayerNorm,
    pub attn: Attention,
    pub norm2: LayerNorm,
    pub ff: FeedForward,
}

impl TransformerBlock {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, heads: usize, rng: &mut Rng) -> Self {
        Self {
            norm1: LayerNorm::new(store, &format!("{name}.ln1"), dim),
            attn: Attention::new(store, &format!("{name}.attn"), dim, heads, rng),
            norm2: LayerNorm::new(store, &format!("{name}.ln2"), dim),
            ff: FeedForward::new(store, &format!("{name}.ff"), dim, 2 * dim, rng),
        }
    }

    pub fn forward(&self, cx: &Ctx, x: Var, mask: Option<Var>) -> Var {
        let h = self.norm1.forward(cx, x);
        let x = cx.g.add(x, self.attn.forward(cx, h, h, mask));
        let h = self.norm2.forward(cx, x);
        cx.g.add(x, self.ff.forward(cx, h))
    }
}

#[derive(Clone, Debug)]
pub struct Transformer {
    pub blocks: Vec<TransformerBlock>,
    pub final_norm: LayerNorm,
}

impl Transformer {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, depth: usize, heads: usize, rng: &mut Rng) -> Self {
        let blocks = (0..depth).map(|i| TransformerBlock::new(store, &format!("{name}.block{i}"), dim, heads, rng)).collect();
        Self { blocks, final_norm: LayerNorm::new(store, &format!("{name}.ln_f"), dim) }
    }

    pub fn forward(&self, cx: &Ctx, mut x: Var, mask: Option<Var>) -> Var {
        for b in &self.blocks {
            x = b.forward(cx, x, mask);
        }
        self.final_norm.forward(cx, x)
    }
}

/// 1-D convolution over the row (time) axis, realized as unfold + matmul.
#[derive(Clone, Debug)]
pub struct Conv1d {
    pub weight: ParamId,
    pub bias: ParamId,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Conv1d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        rng: &mut Rng,
    ) -> Self {
        let bound = 1.0 / ((in_ch * kernel) as f64).sqrt();
        let weight = store.uniform(format!("{name}.weight"), kernel * in_ch, out_ch, bound, rng);
        let bias = store.uniform(format!("{name}.bias"), 1, out_ch, bound, rng);
        Self { weight, bias, kernel, stride, pad }
    }

    pub fn forward(&self, cx: &Ctx, x: Var) -> Var {
        let cols = cx.g.unfold(x, self.kernel, self.stride, self.pad);
        let y = cx.g.matmul(cols, cx.p(self.weight));
        cx.g.add_row(y, cx.p(self.bias))
    }
}

/// Sinusoidal position table, `len × dim`.
pub fn sinusoidal_positions(len: usize, dim: usize) -> Tensor {
    let mut t = Tensor::zeros(len, dim);
    for p in 0..len {
        for i in 0..dim {
            let freq = 1.0 / 10000f64.powf((2 * (i / 2)) as f64 / dim as f64);
            let v = if i % 2 == 0 { (p as f64 * freq).sin() } else { (p as f64 * freq).cos() };
            t.set(p, i, v);
        }
    }
    t
}

/// Additive attention mask allowing attention only within equal `group` ids.
pub fn block_diagonal_mask(groups: &[usize]) -> Tensor {
    let n = groups.len();
    let mut m = Tensor::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if groups[i] != groups[j] {
                m.set(i, j, -1e9);
            }
        }
    }
    m
}
