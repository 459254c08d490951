use super::graph::{Graph, Var};
use super::tensor::Tensor;

/// Largest relative disagreement between the analytic gradient of
/// `sum(w ⊙ f(x))` and its central finite difference with step `h`.
///
/// `w` is a fixed non-uniform weighting so every output element matters.
/// Relative error is `|a − n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_check(x: &Tensor, h: f64, f: impl Fn(&Graph, Var) -> Var) -> f64 {
    let weighted = |g: &Graph, xv: Var| {
        let y = f(g, xv);
        let (r, c) = g.shape(y);
        let w = Tensor::from_vec(r, c, (0..r * c).map(|i| 0.3 + 0.17 * (i % 7) as f64).collect());
        g.sum(g.mul(y, g.leaf(w)))
    };
    let g = Graph::new();
    let xv = g.leaf(x.clone());
    let grads = g.backward(weighted(&g, xv));
    let analytic = grads.get(xv).cloned().unwrap_or_else(|| Tensor::zeros(x.rows(), x.cols()));
    let eval = |x: &Tensor| {
        let g = Graph::new();
        let xv = g.leaf(x.clone());
        g.item(weighted(&g, xv))
    };
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let mut xp = x.clone();
        xp.data_mut()[i] += h;
        let mut xm = x.clone();
        xm.data_mut()[i] -= h;
        let numeric = (eval(&xp) - eval(&xm)) / (2.0 * h);
        let a = analytic.data()[i];
        worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
    }
    worst
}
