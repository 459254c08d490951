use crate::error::{Error, Result};
use crate::nn::{Graph, Tensor, Var};

/// Additive logit for filtered entries; `exp` of it underflows to exactly 0.
const BLOCKED: f64 = -1e30;

/// `softmax(z_low · z_coarseᵀ / √d_k) · z_coarse` on the graph.
pub fn cross_attention_fuse_var(g: &Graph, z_low: Var, z_coarse: Var, d_k: usize) -> Result<Var> {
    let (n, d) = g.shape(z_low);
    let (m, dc) = g.shape(z_coarse);
    if m == 0 {
        return Err(Error::EmptyContext);
    }
    if d != dc || n == 0 || d_k == 0 {
        return Err(Error::Dim(format!("cross attention over {n}×{d} and {m}×{dc} with d_k={d_k}")));
    }
    let logits = g.scale(g.matmul_t(z_low, z_coarse), 1.0 / (d_k as f64).sqrt());
    Ok(g.matmul(g.softmax(logits), z_coarse))
}

/// Single-head cross attention whose output rows are convex combinations of
/// the rows of `z_coarse`.
pub fn cross_attention_fuse(z_low: &Tensor, z_coarse: &Tensor, d_k: usize) -> Result<Tensor> {
    if z_coarse.rows() == 0 {
        return Err(Error::EmptyContext);
    }
    let g = Graph::new();
    let out = cross_attention_fuse_var(&g, g.leaf(z_low.clone()), g.leaf(z_coarse.clone()), d_k)?;
    Ok(g.tensor(out))
}

fn check_rows(t: &Tensor) -> Result<()> {
    for r in 0..t.rows() {
        if t.row(r).iter().all(|&x| x == 0.0) {
            return Err(Error::ZeroNormEmbedding(r));
        }
    }
    Ok(())
}

/// Cosine similarities between rows of `z_text` and rows of `z_motion`, on the graph.
pub fn similarity_var(g: &Graph, z_text: Var, z_motion: Var) -> Var {
    g.matmul_t(g.normalize_rows(z_text), g.normalize_rows(z_motion))
}

/// `S_ij = cos(z_text_i, z_motion_j)`.
pub fn similarity_matrix(z_text: &Tensor, z_motion: &Tensor) -> Result<Tensor> {
    if z_text.cols() != z_motion.cols() {
        return Err(Error::Dim(format!("{} vs {} columns", z_text.cols(), z_motion.cols())));
    }
    check_rows(z_text)?;
    check_rows(z_motion)?;
    let g = Graph::new();
    let s = similarity_var(&g, g.leaf(z_text.clone()), g.leaf(z_motion.clone()));
    Ok(g.tensor(s).map(|x| x.clamp(-1.0, 1.0)))
}

/// Symmetric InfoNCE on the graph. `filter[i][j] = true` removes the
/// off-diagonal pair `(i, j)` from both denominators; the diagonal is never
/// removed.
pub fn infonce_var(g: &Graph, s: Var, temperature: f64, filter: Option<&[Vec<bool>]>) -> Result<Var> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidTemperature(temperature));
    }
    let (n, m) = g.shape(s);
    if n != m || n < 2 {
        return Err(Error::Dim(format!("infonce needs a square matrix with N ≥ 2, got {n}×{m}")));
    }
    let mut logits = g.scale(s, 1.0 / temperature);
    if let Some(f) = filter {
        if f.len() != n || f.iter().any(|r| r.len() != n) {
            return Err(Error::Dim("negative filter shape differs from S".into()));
        }
        let mut mask = Tensor::zeros(n, n);
        for (i, row) in f.iter().enumerate() {
            for (j, &blocked) in row.iter().enumerate() {
                if blocked && i != j {
                    mask.set(i, j, BLOCKED);
                }
            }
        }
        logits = g.add(logits, g.leaf(mask));
    }
    let diag: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
    let rows = g.sum(g.pick(g.log_softmax(logits), &diag));
    let cols = g.sum(g.pick(g.log_softmax(g.transpose(logits)), &diag));
    Ok(g.scale(g.add(rows, cols), -1.0 / (2.0 * n as f64)))
}

pub fn infonce(s: &Tensor, temperature: f64, filter: Option<&[Vec<bool>]>) -> Result<f64> {
    let g = Graph::new();
    let loss = infonce_var(&g, g.leaf(s.clone()), temperature, filter)?;
    Ok(g.item(loss))
}

/// Diagonal Gaussians, one per row: means and standard deviations.
#[derive(Clone, Copy, Debug)]
pub struct GaussianVar {
    pub mu: Var,
    pub sigma: Var,
}

/// `KL(p ‖ q)` for diagonal Gaussians, summed over dimensions and averaged over rows.
pub fn gaussian_kl_var(g: &Graph, p: GaussianVar, q: GaussianVar) -> Var {
    // ln σq − ln σp + (σp² + (μp − μq)²) / (2 σq²) − 1/2
    let log_ratio = g.sub(g.log(q.sigma), g.log(p.sigma));
    let num = g.add(g.square(p.sigma), g.square(g.sub(p.mu, q.mu)));
    let den = g.scale(g.square(q.sigma), 2.0);
    let den_inv = g.exp(g.neg(g.log(den)));
    let per = g.offset(g.add(log_ratio, g.mul(num, den_inv)), -0.5);
    let rows = g.shape(per).0;
    g.scale(g.sum(per), 1.0 / rows as f64)
}

/// `KL(p ‖ N(0, I))`, summed over dimensions and averaged over rows.
pub fn standard_kl_var(g: &Graph, p: GaussianVar) -> Var {
    // (μ² + σ² − 1 − 2 ln σ) / 2
    let per = g.sub(g.add(g.square(p.mu), g.square(p.sigma)), g.scale(g.log(p.sigma), 2.0));
    let per = g.scale(g.offset(per, -1.0), 0.5);
    let rows = g.shape(per).0;
    g.scale(g.sum(per), 1.0 / rows as f64)
}

/// `KL(T‖M) + KL(M‖T) + KL(T‖N) + KL(M‖N)` with `N` the standard normal.
pub fn kl_regularizers_var(g: &Graph, text: GaussianVar, motion: GaussianVar) -> Var {
    let a = gaussian_kl_var(g, text, motion);
    let b = gaussian_kl_var(g, motion, text);
    let c = standard_kl_var(g, text);
    let d = standard_kl_var(g, motion);
    g.add(g.add(a, b), g.add(c, d))
}

fn check_sigma(t: &Tensor) -> Result<()> {
    if t.data().iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidArgument("standard deviations must be positive".into()));
    }
    Ok(())
}

/// Tensor form of [`kl_regularizers_var`]; each argument is `(μ, σ)`.
pub fn kl_regularizers(text: (&Tensor, &Tensor), motion: (&Tensor, &Tensor)) -> Result<f64> {
    for t in [text.0, text.1, motion.0, motion.1] {
        if t.shape() != text.0.shape() {
            return Err(Error::Dim("distribution parameter shapes differ".into()));
        }
    }
    check_sigma(text.1)?;
    check_sigma(motion.1)?;
    let g = Graph::new();
    let t = GaussianVar { mu: g.leaf(text.0.clone()), sigma: g.leaf(text.1.clone()) };
    let m = GaussianVar { mu: g.leaf(motion.0.clone()), sigma: g.leaf(motion.1.clone()) };
    Ok(g.item(kl_regularizers_var(&g, t, m)))
}

/// `KL(N(μ, σ²) ‖ N(0, 1))` summed over dimensions.
pub fn standard_kl(mu: &[f64], sigma: &[f64]) -> f64 {
    mu.iter().zip(sigma).map(|(m, s)| 0.5 * (m * m + s * s - 1.0 - 2.0 * s.ln())).sum()
}

/// Mean elementwise smooth-L1 (unit threshold) of `a − b`.
pub fn smooth_l1_var(g: &Graph, a: Var, b: Var) -> Var {
    g.mean(g.smooth_l1(g.sub(a, b)))
}

fn smooth_l1_tensor(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Dim(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let g = Graph::new();
    Ok(g.item(smooth_l1_var(&g, g.leaf(a.clone()), g.leaf(b.clone()))))
}

/// Smooth-L1 distance between text and motion latents.
pub fn embedding_similarity_loss(z_text: &Tensor, z_motion: &Tensor) -> Result<f64> {
    smooth_l1_tensor(z_text, z_motion)
}

/// Smooth-L1 distance between decoded and target features.
pub fn reconstruction_loss(decoded: &Tensor, target: &Tensor) -> Result<f64> {
    smooth_l1_tensor(decoded, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng;
    use proptest::prelude::*;
    use rand::Rng as _;

    fn random(r: usize, c: usize, seed: u64) -> Tensor {
        let mut rng = rng(seed);
        Tensor::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn fuse_single_context_row() {
        let low = random(3, 4, 1);
        let coarse = random(1, 4, 2);
        let out = cross_attention_fuse(&low, &coarse, 4).unwrap();
        for r in 0..3 {
            assert_eq!(out.row(r), coarse.row(0));
        }
    }

    #[test]
    fn fuse_hand_weights() {
        // Logits (0, ln 3)/√2 before scaling: pick z_low so z_low·c1 = 0 and z_low·c2 = ln 3.
        let l3 = 3f64.ln();
        let low = Tensor::from_vec(1, 2, vec![0.0, 1.0]);
        let coarse = Tensor::from_vec(2, 2, vec![1.0, 0.0, 0.5, l3]);
        let out = cross_attention_fuse(&low, &coarse, 2).unwrap();
        let e = (l3 / 2f64.sqrt()).exp();
        let (w0, w1) = (1.0 / (1.0 + e), e / (1.0 + e));
        assert!((out.get(0, 0) - (w0 * 1.0 + w1 * 0.5)).abs() < 1e-12);
        assert!((out.get(0, 1) - w1 * l3).abs() < 1e-12);
    }

    #[test]
    fn fuse_identical_rows_and_empty_context() {
        let v = vec![0.3, -0.2, 0.9];
        let coarse = Tensor::from_rows(&[v.clone(), v.clone(), v.clone()]);
        let out = cross_attention_fuse(&random(4, 3, 3), &coarse, 3).unwrap();
        for r in 0..4 {
            for c in 0..3 {
                assert!((out.get(r, c) - v[c]).abs() < 1e-15);
            }
        }
        assert!(matches!(cross_attention_fuse(&random(1, 3, 3), &Tensor::zeros(0, 3), 3), Err(Error::EmptyContext)));
    }

    #[test]
    fn similarity_hand_values() {
        let r = 0.5f64.sqrt();
        let t = Tensor::from_vec(2, 2, vec![1.0, 0.0, r, r]);
        let m = Tensor::from_vec(2, 2, vec![0.0, 1.0, 1.0, 0.0]);
        let s = similarity_matrix(&t, &m).unwrap();
        let expected = [0.0, 1.0, r, r];
        for (a, b) in s.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(similarity_matrix(&Tensor::identity(3), &Tensor::identity(3)).unwrap(), Tensor::identity(3));
        assert!(matches!(similarity_matrix(&Tensor::zeros(1, 2), &m), Err(Error::ZeroNormEmbedding(0))));
    }

    #[test]
    fn infonce_examples() {
        for n in [2, 8, 64] {
            for tau in [0.07, 0.1, 1.0] {
                let l = infonce(&Tensor::full(n, n, 0.3), tau, None).unwrap();
                assert!((l - (n as f64).ln()).abs() < 1e-9);
            }
        }
        let e = std::f64::consts::E;
        let l = infonce(&Tensor::identity(2), 1.0, None).unwrap();
        assert!((l + (e / (e + 1.0)).ln()).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        for d in [2.0, 5.0, 10.0] {
            let mut s = Tensor::zeros(3, 3);
            for i in 0..3 {
                s.set(i, i, d);
            }
            let l = infonce(&s, 1.0, None).unwrap();
            assert!(l < prev);
            prev = l;
        }
        assert!(matches!(infonce(&Tensor::identity(2), 0.0, None), Err(Error::InvalidTemperature(_))));
    }

    #[test]
    fn infonce_filter_drops_negatives() {
        // Filtering every negative leaves only the positive: loss 0.
        let s = random(4, 4, 5);
        let all = vec![vec![true; 4]; 4];
        assert!(infonce(&s, 0.1, Some(&all)).unwrap().abs() < 1e-12);
        let none = vec![vec![false; 4]; 4];
        assert_eq!(infonce(&s, 0.1, Some(&none)).unwrap(), infonce(&s, 0.1, None).unwrap());
    }

    #[test]
    fn gradients_match_finite_differences() {
        use crate::nn::gradient_check;
        let h = 1e-5;
        // InfoNCE through the similarity matrix, with and without a filter.
        let s = random(4, 4, 7);
        assert!(gradient_check(&s, h, |g, x| infonce_var(g, x, 0.1, None).unwrap()) < 1e-4);
        let f: Vec<Vec<bool>> = (0..4).map(|i| (0..4).map(|j| i + j == 3).collect()).collect();
        assert!(gradient_check(&s, h, |g, x| infonce_var(g, x, 0.5, Some(&f)).unwrap()) < 1e-4);
        // Cross attention: gradient through both the queries and the context.
        let coarse = random(3, 8, 8);
        let low = random(4, 8, 9);
        assert!(gradient_check(&low, h, |g, x| cross_attention_fuse_var(g, x, g.leaf(coarse.clone()), 8).unwrap()) < 1e-4);
        assert!(gradient_check(&coarse, h, |g, x| cross_attention_fuse_var(g, g.leaf(low.clone()), x, 8).unwrap()) < 1e-4);
        // KL: rows are μ_text, σ_text, μ_motion, σ_motion stacked.
        let mut x = random(8, 6, 10);
        for r in [2, 3, 6, 7] {
            for v in x.row_mut(r) {
                *v = v.abs() + 0.3;
            }
        }
        let kl = |g: &Graph, x: Var| {
            let t = GaussianVar { mu: g.slice_rows(x, 0, 2), sigma: g.slice_rows(x, 2, 2) };
            let m = GaussianVar { mu: g.slice_rows(x, 4, 2), sigma: g.slice_rows(x, 6, 2) };
            kl_regularizers_var(g, t, m)
        };
        assert!(gradient_check(&x, h, kl) < 1e-4);
    }

    #[test]
    fn kl_examples() {
        assert!((standard_kl(&[1.0], &[1.0]) - 0.5).abs() < 1e-15);
        let z = Tensor::zeros(1, 3);
        let o = Tensor::full(1, 3, 1.0);
        assert_eq!(kl_regularizers((&z, &o), (&z, &o)).unwrap(), 0.0);
        // T = N(1, 1), M = N(0, 1): KL(T‖M) = KL(M‖T) = KL(T‖N) = 0.5, KL(M‖N) = 0.
        let one = Tensor::full(1, 1, 1.0);
        let zero = Tensor::zeros(1, 1);
        assert!((kl_regularizers((&one, &one), (&zero, &one)).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn smooth_l1_examples() {
        let a = Tensor::scalar(0.5);
        let z = Tensor::scalar(0.0);
        assert!((embedding_similarity_loss(&a, &z).unwrap() - 0.125).abs() < 1e-15);
        assert!((reconstruction_loss(&Tensor::scalar(2.0), &z).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(reconstruction_loss(&a, &a).unwrap(), 0.0);
        assert!(reconstruction_loss(&a, &Tensor::zeros(1, 2)).is_err());
    }

    proptest! {
        #[test]
        fn infonce_permutation_invariant(seed in 0u64..500, n in 2usize..7) {
            let s = random(n, n, seed);
            let perm = crate::rng::seeded_permutation(n, seed + 1);
            let mut p = Tensor::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    p.set(i, j, s.get(perm[i], perm[j]));
                }
            }
            let a = infonce(&s, 0.1, None).unwrap();
            let b = infonce(&p, 0.1, None).unwrap();
            prop_assert!((a - b).abs() < 1e-10);
        }

        #[test]
        fn fuse_stays_in_convex_hull(seed in 0u64..500, n in 1usize..5, m in 1usize..5) {
            let low = random(n, 3, seed);
            let coarse = random(m, 3, seed + 7);
            let out = cross_attention_fuse(&low, &coarse, 3).unwrap();
            for c in 0..3 {
                let lo = (0..m).map(|r| coarse.get(r, c)).fold(f64::INFINITY, f64::min);
                let hi = (0..m).map(|r| coarse.get(r, c)).fold(f64::NEG_INFINITY, f64::max);
                for r in 0..n {
                    prop_assert!(out.get(r, c) >= lo - 1e-12 && out.get(r, c) <= hi + 1e-12);
                }
            }
        }

        #[test]
        fn kl_nonnegative(seed in 0u64..500) {
            let mu_t = random(2, 3, seed);
            let mu_m = random(2, 3, seed + 1);
            let s_t = random(2, 3, seed + 2).map(|x| x.abs() + 0.1);
            let s_m = random(2, 3, seed + 3).map(|x| x.abs() + 0.1);
            prop_assert!(kl_regularizers((&mu_t, &s_t), (&mu_m, &s_m)).unwrap() >= 0.0);
        }

        #[test]
        fn similarity_scale_invariant(seed in 0u64..500, c in 0.1f64..10.0) {
            let t = random(3, 4, seed).map(|x| x + 1.5);
            let m = random(3, 4, seed + 1).map(|x| x - 1.5);
            let a = similarity_matrix(&t, &m).unwrap();
            let b = similarity_matrix(&t.map(|x| x * c), &m).unwrap();
            prop_assert!(a.max_abs_diff(&b) < 1e-12);
        }
    }
}
