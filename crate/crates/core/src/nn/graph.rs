//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A [`Graph`] is an append-only tape. Every operation evaluates eagerly,
//! records its inputs, and returns a [`Var`] handle. [`Graph::backward`]
//! sweeps the tape once in reverse and returns the gradient of a scalar
//! output with respect to every node.
//!
//! The tape is single-threaded and evaluation order is fixed, so identical
//! inputs produce bit-identical values and gradients.

use std::cell::{Ref, RefCell};

use super::tensor::{dot, Tensor};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    MulCol(Var, Var),
    AddScalarVar(Var, Var),
    MulScalarVar(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    Relu(Var),
    Gelu(Var),
    Tanh(Var),
    Softplus(Var),
    Exp(Var),
    Log(Var),
    Sin(Var),
    Cos(Var),
    Square(Var),
    SmoothL1(Var),
    Softmax(Var),
    LogSoftmax(Var),
    LayerNorm(Var, f64),
    NormalizeRows(Var),
    SumAll(Var),
    MeanAll(Var),
    SumRows(Var),
    SumCols(Var),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    Pick(Var, Vec<(usize, usize)>),
    Reshape(Var),
    Unfold { input: Var, kernel: usize, stride: usize, pad: usize },
    CumSumRows(Var),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients produced by [`Graph::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

/// Append-only computation tape.
#[derive(Default)]
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044_715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044_715 * x * x * x);
    let t = u.tanh();
    let du = GELU_C * (1.0 + 3.0 * 0.044_715 * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_row(row: &[f64], out: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &x) in out.iter_mut().zip(row) {
        *o = (x - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

fn log_softmax_row(row: &[f64], out: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
    for (o, &x) in out.iter_mut().zip(row) {
        *o = x - lse;
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op });
        Var(nodes.len() - 1)
    }

    /// Constant or parameter input.
    pub fn leaf(&self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn scalar(&self, value: f64) -> Var {
        self.leaf(Tensor::scalar(value))
    }

    pub fn value(&self, v: Var) -> Ref<'_, Tensor> {
        Ref::map(self.nodes.borrow(), |n| &n[v.0].value)
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes.borrow()[v.0].value.shape()
    }

    pub fn item(&self, v: Var) -> f64 {
        self.value(v).item()
    }

    /// Copy of the value, detached from the tape.
    pub fn tensor(&self, v: Var) -> Tensor {
        self.value(v).clone()
    }

    /// New leaf holding the current value of `v`; gradients stop here.
    pub fn detach(&self, v: Var) -> Var {
        let t = self.tensor(v);
        self.leaf(t)
    }

    fn unary(&self, a: Var, f: impl Fn(&Tensor) -> Tensor, op: Op) -> Var {
        let value = f(&self.value(a));
        self.push(value, op)
    }

    fn binary(&self, a: Var, b: Var, f: impl Fn(&Tensor, &Tensor) -> Tensor, op: Op) -> Var {
        let value = {
            let nodes = self.nodes.borrow();
            f(&nodes[a.0].value, &nodes[b.0].value)
        };
        self.push(value, op)
    }

    pub fn matmul(&self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x.matmul(y), Op::MatMul(a, b))
    }

    /// `a · bᵀ`.
    pub fn matmul_t(&self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x.matmul_t(y), Op::MatMulT(a, b))
    }

    pub fn transpose(&self, a: Var) -> Var {
        self.unary(a, Tensor::transpose, Op::Transpose(a))
    }

    pub fn add(&self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x.zip_map(y, |p, q| p + q), Op::Add(a, b))
    }

    pub fn sub(&self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x.zip_map(y, |p, q| p - q), Op::Sub(a, b))
    }

    pub fn mul(&self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x.zip_map(y, |p, q| p * q), Op::Mul(a, b))
    }

    /// `a (r×c) + b (1×c)` broadcast over rows.
    pub fn add_row(&self, a: Var, b: Var) -> Var {
        self.binary(
            a,
            b,
            |x, y| {
                assert_eq!(y.rows(), 1, "add_row expects a row vector");
                assert_eq!(x.cols(), y.cols(), "add_row width mismatch");
                let mut out = x.clone();
                for r in 0..out.rows() {
                    for (o, &v) in out.row_mut(r).iter_mut().zip(y.data()) {
                        *o += v;
                    }
                }
                out
            },
            Op::AddRow(a, b),
        )
    }

    /// `a (r×c) ⊙ b (1×c)` broadcast over rows.
    pub fn mul_row(&self, a: Var, b: Var) -> Var {
        self.binary(
            a,
            b,
            |x, y| {
                assert_eq!(y.rows(), 1, "mul_row expects a row vector");
                assert_eq!(x.cols(), y.cols(), "mul_row width mismatch");
                let mut out = x.clone();
                for r in 0..out.rows() {
                    for (o, &v) in out.row_mut(r).iter_mut().zip(y.data()) {
                        *o *= v;
                    }
                }
                out
            },
            Op::MulRow(a, b),
        )
    }

    /// `a (r×c) ⊙ b (r×1)` broadcast over columns.
    pub fn mul_col(&self, a: Var, b: Var) -> Var {
        self.binary(
            a,
            b,
            |x, y| {
                assert_eq!(y.cols(), 1, "mul_col expects a column vector");
                assert_eq!(x.rows(), y.rows(), "mul_col height mismatch");
                let mut out = x.clone();
                for r in 0..out.rows() {
                    let s = y.get(r, 0);
                    for o in out.row_mut(r) {
                        *o *= s;
                    }
                }
                out
            },
            Op::MulCol(a, b),
        )
    }

    /// `a + s` where `s` is a `1×1` node.
    pub fn add_scalar_var(&self, a: Var, s: Var) -> Var {
        self.binary(
            a,
            s,
            |x, y| {
                let s = y.item();
                x.map(|v| v + s)
            },
            Op::AddScalarVar(a, s),
        )
    }

    /// `a · s` where `s` is a `1×1` node.
    pub fn mul_scalar_var(&self, a: Var, s: Var) -> Var {
        self.binary(
            a,
            s,
            |x, y| {
                let s = y.item();
                x.map(|v| v * s)
            },
            Op::MulScalarVar(a, s),
        )
    }

    pub fn scale(&self, a: Var, s: f64) -> Var {
        self.unary(a, |x| x.scale(s), Op::Scale(a, s))
    }

    /// `a + c` for a constant `c`.
    pub fn offset(&self, a: Var, c: f64) -> Var {
        self.unary(a, |x| x.map(|v| v + c), Op::Offset(a))
    }

    pub fn neg(&self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn relu(&self, a: Var) -> Var {
        self.unary(a, |x| x.map(|v| v.max(0.0)), Op::Relu(a))
    }

    pub fn gelu(&self, a: Var) -> Var {
        self.unary(a, |x| x.map(gelu), Op::Gelu(a))
    }

    pub fn tanh(&self, a: Var) -> Var {
        self.unary(a, |x| x.map(f64::tanh), Op::Tanh(a))
    }

    pub fn softplus(&self, a: Var) -> Var {
        self.unary(a, |x| x.map(softplus), Op::Softplus(a))
    }

    pub fn exp(&self, a: Var) -> Var {
        self.unary(a, |x| x.map(f64::exp), Op::Exp(a))
    }

    pub fn log(&self, a: Var) -> Var {
        self.unary(a, |x| x.map(f64::ln), Op::Log(a))
    }

    pub fn sin(&self, a: Var) -> Var {
        self.unary(a, |x| x.map(f64::sin), Op::Sin(a))
    }

    pub fn cos(&self, a: Var) -> Var {
        self.unary(a, |x| x.map(f64::cos), Op::Cos(a))
    }

    pub fn square(&self, a: Var) -> Var {
        self.unary(a, |x| x.map(|v| v * v), Op::Square(a))
    }

    /// Elementwise Huber function with unit threshold:
    /// `0.5·x²` for `|x| < 1`, `|x| − 0.5` otherwise.
    pub fn smooth_l1(&self, a: Var) -> Var {
        self.unary(
            a,
            |x| x.map(|v| if v.abs() < 1.0 { 0.5 * v * v } else { v.abs() - 0.5 }),
            Op::SmoothL1(a),
        )
    }

    pub fn softmax(&self, a: Var) -> Var {
        self.unary(
            a,
            |x| {
                let mut out = Tensor::zeros(x.rows(), x.cols());
                for r in 0..x.rows() {
                    softmax_row(x.row(r), out.row_mut(r));
                }
                out
            },
            Op::Softmax(a),
        )
    }

    pub fn log_softmax(&self, a: Var) -> Var {
        self.unary(
            a,
            |x| {
                let mut out = Tensor::zeros(x.rows(), x.cols());
                for r in 0..x.rows() {
                    log_softmax_row(x.row(r), out.row_mut(r));
                }
                out
            },
            Op::LogSoftmax(a),
        )
    }

    /// Row-wise standardization without affine parameters.
    pub fn layer_norm(&self, a: Var, eps: f64) -> Var {
        self.unary(
            a,
            |x| {
                let mut out = Tensor::zeros(x.rows(), x.cols());
                let n = x.cols() as f64;
                for r in 0..x.rows() {
                    let row = x.row(r);
                    let mean = row.iter().sum::<f64>() / n;
                    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                    let inv = 1.0 / (var + eps).sqrt();
                    for (o, &v) in out.row_mut(r).iter_mut().zip(row) {
                        *o = (v - mean) * inv;
                    }
                }
                out
            },
            Op::LayerNorm(a, eps),
        )
    }

    /// Divides every row by its Euclidean norm. Callers check for zero rows.
    pub fn normalize_rows(&self, a: Var) -> Var {
        self.unary(
            a,
            |x| {
                let mut out = x.clone();
                for r in 0..out.rows() {
                    let n = dot(x.row(r), x.row(r)).sqrt();
                    for o in out.row_mut(r) {
                        *o /= n;
                    }
                }
                out
            },
            Op::NormalizeRows(a),
        )
    }

    pub fn sum(&self, a: Var) -> Var {
        self.unary(a, |x| Tensor::scalar(x.sum()), Op::SumAll(a))
    }

    pub fn mean(&self, a: Var) -> Var {
        self.unary(a, |x| Tensor::scalar(x.sum() / x.len() as f64), Op::MeanAll(a))
    }

    /// Column sums: `r×c → 1×c`.
    pub fn sum_rows(&self, a: Var) -> Var {
        self.unary(
            a,
            |x| {
                let mut out = Tensor::zeros(1, x.cols());
                for r in 0..x.rows() {
                    for (o, &v) in out.data_mut().iter_mut().zip(x.row(r)) {
                        *o += v;
                    }
                }
                out
            },
            Op::SumRows(a),
        )
    }

    /// Column means: `r×c → 1×c`.
    pub fn mean_rows(&self, a: Var) -> Var {
        let n = self.shape(a).0 as f64;
        let s = self.sum_rows(a);
        self.scale(s, 1.0 / n)
    }

    /// Row sums: `r×c → r×1`.
    pub fn sum_cols(&self, a: Var) -> Var {
        self.unary(
            a,
            |x| {
                let data = (0..x.rows()).map(|r| x.row(r).iter().sum()).collect();
                Tensor::from_vec(x.rows(), 1, data)
            },
            Op::SumCols(a),
        )
    }

    pub fn concat_rows(&self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_rows of nothing");
        let value = {
            let nodes = self.nodes.borrow();
            let ts: Vec<&Tensor> = parts.iter().map(|p| &nodes[p.0].value).collect();
            Tensor::concat_rows(&ts)
        };
        self.push(value, Op::ConcatRows(parts.to_vec()))
    }

    pub fn concat_cols(&self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_cols of nothing");
        let value = {
            let nodes = self.nodes.borrow();
            let rows = nodes[parts[0].0].value.rows();
            let cols: usize = parts.iter().map(|p| nodes[p.0].value.cols()).sum();
            let mut out = Tensor::zeros(rows, cols);
            for r in 0..rows {
                let mut c0 = 0;
                for p in parts {
                    let t = &nodes[p.0].value;
                    assert_eq!(t.rows(), rows, "concat_cols row mismatch");
                    out.row_mut(r)[c0..c0 + t.cols()].copy_from_slice(t.row(r));
                    c0 += t.cols();
                }
            }
            out
        };
        self.push(value, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_rows(&self, a: Var, start: usize, len: usize) -> Var {
        self.unary(a, |x| x.slice_rows(start, len), Op::SliceRows(a, start))
    }

    pub fn slice_cols(&self, a: Var, start: usize, len: usize) -> Var {
        self.unary(
            a,
            |x| {
                assert!(start + len <= x.cols(), "column slice out of range");
                let mut out = Tensor::zeros(x.rows(), len);
                for r in 0..x.rows() {
                    out.row_mut(r).copy_from_slice(&x.row(r)[start..start + len]);
                }
                out
            },
            Op::SliceCols(a, start),
        )
    }

    /// Row gather; indices may repeat (embedding lookup, upsampling, padding).
    pub fn gather_rows(&self, a: Var, indices: &[usize]) -> Var {
        self.unary(
            a,
            |x| {
                let mut out = Tensor::zeros(indices.len(), x.cols());
                for (i, &idx) in indices.iter().enumerate() {
                    out.row_mut(i).copy_from_slice(x.row(idx));
                }
                out
            },
            Op::GatherRows(a, indices.to_vec()),
        )
    }

    /// Selected entries as an `n×1` column.
    pub fn pick(&self, a: Var, entries: &[(usize, usize)]) -> Var {
        self.unary(
            a,
            |x| Tensor::from_vec(entries.len(), 1, entries.iter().map(|&(r, c)| x.get(r, c)).collect()),
            Op::Pick(a, entries.to_vec()),
        )
    }

    pub fn reshape(&self, a: Var, rows: usize, cols: usize) -> Var {
        self.unary(a, |x| x.clone().reshape(rows, cols), Op::Reshape(a))
    }

    /// Sliding windows over rows with zero padding: `T×C → T_out×(kernel·C)`.
    /// Row `o` of the output concatenates input rows `o·stride − pad .. + kernel`.
    pub fn unfold(&self, input: Var, kernel: usize, stride: usize, pad: usize) -> Var {
        self.unary(
            input,
            |x| {
                let (t, c) = x.shape();
                let out_len = unfold_len(t, kernel, stride, pad);
                let mut out = Tensor::zeros(out_len, kernel * c);
                for o in 0..out_len {
                    for k in 0..kernel {
                        let src = (o * stride + k) as isize - pad as isize;
                        if src >= 0 && (src as usize) < t {
                            out.row_mut(o)[k * c..(k + 1) * c].copy_from_slice(x.row(src as usize));
                        }
                    }
                }
                out
            },
            Op::Unfold { input, kernel, stride, pad },
        )
    }

    /// Exclusive running sum down the rows: row `t` holds the sum of rows `0..t`.
    pub fn cumsum_rows_exclusive(&self, a: Var) -> Var {
        self.unary(
            a,
            |x| {
                let mut out = Tensor::zeros(x.rows(), x.cols());
                for r in 1..x.rows() {
                    for c in 0..x.cols() {
                        let v = out.get(r - 1, c) + x.get(r - 1, c);
                        out.set(r, c, v);
                    }
                }
                out
            },
            Op::CumSumRows(a),
        )
    }

    /// Gradients of the scalar `output` with respect to every node.
    pub fn backward(&self, output: Var) -> Gradients {
        let nodes = self.nodes.borrow();
        assert_eq!(nodes[output.0].value.len(), 1, "backward from a non-scalar node");
        let mut grads: Vec<Option<Tensor>> = vec![None; output.0 + 1];
        grads[output.0] = Some(Tensor::scalar(1.0));

        fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }

        for idx in (0..=output.0).rev() {
            let Some(gy) = grads[idx].take() else { continue };
            let node = &nodes[idx];
            let y = &node.value;
            let val = |v: Var| &nodes[v.0].value;
            match &node.op {
                Op::Leaf => {
                    grads[idx] = Some(gy);
                    continue;
                }
                Op::MatMul(a, b) => {
                    accumulate(&mut grads, *a, gy.matmul_t(val(*b)));
                    accumulate(&mut grads, *b, val(*a).t_matmul(&gy));
                }
                Op::MatMulT(a, b) => {
                    accumulate(&mut grads, *a, gy.matmul(val(*b)));
                    accumulate(&mut grads, *b, gy.t_matmul(val(*a)));
                }
                Op::Transpose(a) => accumulate(&mut grads, *a, gy.transpose()),
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, gy.clone());
                    accumulate(&mut grads, *b, gy);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, gy.scale(-1.0));
                    accumulate(&mut grads, *a, gy);
                }
                Op::Mul(a, b) => {
                    accumulate(&mut grads, *a, gy.zip_map(val(*b), |g, q| g * q));
                    accumulate(&mut grads, *b, gy.zip_map(val(*a), |g, p| g * p));
                }
                Op::AddRow(a, b) => {
                    let mut gb = Tensor::zeros(1, gy.cols());
                    for r in 0..gy.rows() {
                        for (o, &g) in gb.data_mut().iter_mut().zip(gy.row(r)) {
                            *o += g;
                        }
                    }
                    accumulate(&mut grads, *b, gb);
                    accumulate(&mut grads, *a, gy);
                }
                Op::MulRow(a, b) => {
                    let (x, w) = (val(*a), val(*b));
                    let mut ga = gy.clone();
                    let mut gb = Tensor::zeros(1, gy.cols());
                    for r in 0..gy.rows() {
                        for c in 0..gy.cols() {
                            let g = gy.get(r, c);
                            ga.set(r, c, g * w.get(0, c));
                            gb.data_mut()[c] += g * x.get(r, c);
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::MulCol(a, b) => {
                    let (x, w) = (val(*a), val(*b));
                    let mut ga = gy.clone();
                    let mut gb = Tensor::zeros(gy.rows(), 1);
                    for r in 0..gy.rows() {
                        let s = w.get(r, 0);
                        let mut acc = 0.0;
                        for c in 0..gy.cols() {
                            let g = gy.get(r, c);
                            ga.set(r, c, g * s);
                            acc += g * x.get(r, c);
                        }
                        gb.set(r, 0, acc);
                    }
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::AddScalarVar(a, s) => {
                    accumulate(&mut grads, *s, Tensor::scalar(gy.sum()));
                    accumulate(&mut grads, *a, gy);
                }
                Op::MulScalarVar(a, s) => {
                    let sv = val(*s).item();
                    let gs = dot(gy.data(), val(*a).data());
                    accumulate(&mut grads, *s, Tensor::scalar(gs));
                    accumulate(&mut grads, *a, gy.scale(sv));
                }
                Op::Scale(a, s) => accumulate(&mut grads, *a, gy.scale(*s)),
                Op::Offset(a) => accumulate(&mut grads, *a, gy),
                Op::Relu(a) => {
                    let g = gy.zip_map(val(*a), |g, x| if x > 0.0 { g } else { 0.0 });
                    accumulate(&mut grads, *a, g);
                }
                Op::Gelu(a) => {
                    let g = gy.zip_map(val(*a), |g, x| g * gelu_grad(x));
                    accumulate(&mut grads, *a, g);
                }
                Op::Tanh(a) => accumulate(&mut grads, *a, gy.zip_map(y, |g, t| g * (1.0 - t * t))),
                Op::Softplus(a) => {
                    accumulate(&mut grads, *a, gy.zip_map(val(*a), |g, x| g * sigmoid(x)));
                }
                Op::Exp(a) => accumulate(&mut grads, *a, gy.zip_map(y, |g, e| g * e)),
                Op::Log(a) => accumulate(&mut grads, *a, gy.zip_map(val(*a), |g, x| g / x)),
                Op::Sin(a) => accumulate(&mut grads, *a, gy.zip_map(val(*a), |g, x| g * x.cos())),
                Op::Cos(a) => accumulate(&mut grads, *a, gy.zip_map(val(*a), |g, x| -g * x.sin())),
                Op::Square(a) => accumulate(&mut grads, *a, gy.zip_map(val(*a), |g, x| 2.0 * g * x)),
                Op::SmoothL1(a) => {
                    let g = gy.zip_map(val(*a), |g, x| if x.abs() < 1.0 { g * x } else { g * x.signum() });
                    accumulate(&mut grads, *a, g);
                }
                Op::Softmax(a) => {
                    let mut g = Tensor::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let s = dot(gy.row(r), y.row(r));
                        for ((o, &gv), &yv) in g.row_mut(r).iter_mut().zip(gy.row(r)).zip(y.row(r)) {
                            *o = yv * (gv - s);
                        }
                    }
                    accumulate(&mut grads, *a, g);
                }
                Op::LogSoftmax(a) => {
                    let mut g = Tensor::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let s: f64 = gy.row(r).iter().sum();
                        for ((o, &gv), &lv) in g.row_mut(r).iter_mut().zip(gy.row(r)).zip(y.row(r)) {
                            *o = gv - lv.exp() * s;
                        }
                    }
                    accumulate(&mut grads, *a, g);
                }
                Op::LayerNorm(a, eps) => {
                    let x = val(*a);
                    let n = x.cols() as f64;
                    let mut g = Tensor::zeros(x.rows(), x.cols());
                    for r in 0..x.rows() {
                        let row = x.row(r);
                        let mean = row.iter().sum::<f64>() / n;
                        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                        let inv = 1.0 / (var + eps).sqrt();
                        let gm = gy.row(r).iter().sum::<f64>() / n;
                        let gym = dot(gy.row(r), y.row(r)) / n;
                        for c in 0..x.cols() {
                            g.set(r, c, inv * (gy.get(r, c) - gm - y.get(r, c) * gym));
                        }
                    }
                    accumulate(&mut grads, *a, g);
                }
                Op::NormalizeRows(a) => {
                    let x = val(*a);
                    let mut g = Tensor::zeros(x.rows(), x.cols());
                    for r in 0..x.rows() {
                        let n = dot(x.row(r), x.row(r)).sqrt();
                        let s = dot(y.row(r), gy.row(r));
                        for c in 0..x.cols() {
                            g.set(r, c, (gy.get(r, c) - y.get(r, c) * s) / n);
                        }
                    }
                    accumulate(&mut grads, *a, g);
                }
                Op::SumAll(a) => {
                    let (r, c) = val(*a).shape();
                    accumulate(&mut grads, *a, Tensor::full(r, c, gy.item()));
                }
                Op::MeanAll(a) => {
                    let (r, c) = val(*a).shape();
                    accumulate(&mut grads, *a, Tensor::full(r, c, gy.item() / (r * c) as f64));
                }
                Op::SumRows(a) => {
                    let (r, c) = val(*a).shape();
                    let mut g = Tensor::zeros(r, c);
                    for i in 0..r {
                        g.row_mut(i).copy_from_slice(gy.data());
                    }
                    accumulate(&mut grads, *a, g);
                }
                Op::SumCols(a) => {
                    let (r, c) = val(*a).shape();
                    let mut g = Tensor::zeros(r, c);
                    for i in 0..r {
                        let v = gy.get(i, 0);
                        g.row_mut(i).iter_mut().for_each(|o| *o = v);
                    }
                    accumulate(&mut grads, *a, g);
                }
                Op::ConcatRows(parts) => {
                    let mut r0 = 0;
                    for p in parts {
                        let rows = val(*p).rows();
                        accumulate(&mut grads, *p, gy.slice_rows(r0, rows));
                        r0 += rows;
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut c0 = 0;
                    for p in parts {
                        let (rows, cols) = val(*p).shape();
                        let mut g = Tensor::zeros(rows, cols);
                        for r in 0..rows {
                            g.row_mut(r).copy_from_slice(&gy.row(r)[c0..c0 + cols]);
                        }
                        accumulate(&mut grads, *p, g);
                        c0 += cols;
                    }
                }
                Op::SliceRows(a, start) => {
                    let (r, c) = val(*a).shape();
                    let mut g = Tensor::zeros(r, c);
                    for i in 0..gy.rows() {
                        g.row_mut(start + i).copy_from_slice(gy.row(i));
                    }
                    accumulate(&mut grads, *a, g);
                }
                Op::SliceCols(a, start) => {
                    let (r, c) = val(*a).shape();
                    let mut g = Tensor::zeros(r, c);
                    for i in 0..r {
                        g.row_mut(i)[*start..start + gy.cols()].copy_from_slice(gy.row(i));
                    }
                    accumulate(&mut grads, *a, g);
                }
                Op::GatherRows(a, indices) => {
                    let (r, c) = val(*a).shape();
                    let mut g = Tensor::zeros(r, c);
                    for (i, &idx) in indices.iter().enumerate() {
                        for (o, &v) in g.row_mut(idx).iter_mut().zip(gy.row(i)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *a, g);
                }
                Op::Pick(a, entries) => {
                    let (r, c) = val(*a).shape();
                    let mut g = Tensor::zeros(r, c);
                    for (i, &(er, ec)) in entries.iter().enumerate() {
                        let cur = g.get(er, ec);
                        g.set(er, ec, cur + gy.get(i, 0));
                    }
                    accumulate(&mut grads, *a, g);
                }
                Op::Reshape(a) => {
                    let (r, c) = val(*a).shape();
                    accumulate(&mut grads, *a, gy.reshape(r, c));
                }
                Op::Unfold { input, kernel, stride, pad } => {
                    let (t, c) = val(*input).shape();
                    let mut g = Tensor::zeros(t, c);
                    for o in 0..gy.rows() {
                        for k in 0..*kernel {
                            let src = (o * stride + k) as isize - *pad as isize;
                            if src >= 0 && (src as usize) < t {
                                let grow = &gy.row(o)[k * c..(k + 1) * c];
                                for (dst, &v) in g.row_mut(src as usize).iter_mut().zip(grow) {
                                    *dst += v;
                                }
                            }
                        }
                    }
                    accumulate(&mut grads, *input, g);
                }
                Op::CumSumRows(a) => {
                    // d out[r] / d x[s] = 1 for s < r, so grad x[s] = sum_{r > s} gy[r].
                    let (r, c) = val(*a).shape();
                    let mut g = Tensor::zeros(r, c);
                    for s in (0..r.saturating_sub(1)).rev() {
                        for col in 0..c {
                            let v = g.get(s + 1, col) + gy.get(s + 1, col);
                            g.set(s, col, v);
                        }
                    }
                    accumulate(&mut grads, *a, g);
                }
            }
        }
        Gradients { grads }
    }
}

/// Output length of [`Graph::unfold`].
pub fn unfold_len(len: usize, kernel: usize, stride: usize, pad: usize) -> usize {
    let padded = len + 2 * pad;
    if padded < kernel {
        0
    } else {
        (padded - kernel) / stride + 1
    }
}
