use nalgebra::{DMatrix, SymmetricEigen};

use crate::alignment::AlignmentModel;
use crate::annotation::cosine;
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::representation::MotionSequence;
use crate::rng::seeded_permutation;

/// Eigenvalues down to this are treated as zero in matrix square roots.
pub const EIGEN_TOLERANCE: f64 = -1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RPrecision {
    pub top1: f64,
    pub top2: f64,
    pub top3: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenerationReport {
    pub fid: f64,
    pub r_precision: RPrecision,
    pub mm_dist: f64,
    pub diversity: f64,
    pub mmodality: f64,
}

fn to_matrix(t: &Tensor) -> DMatrix<f64> {
    DMatrix::from_row_slice(t.rows(), t.cols(), t.data())
}

/// Feature mean and unbiased covariance of the rows of `features`.
pub fn feature_statistics(features: &Tensor) -> Result<(Vec<f64>, Tensor)> {
    let (n, d) = features.shape();
    if n < 2 {
        return Err(Error::InsufficientSamples(format!("covariance of {n} samples")));
    }
    let mean: Vec<f64> = (0..d).map(|c| (0..n).map(|r| features.get(r, c)).sum::<f64>() / n as f64).collect();
    let mut cov = Tensor::zeros(d, d);
    for r in 0..n {
        let x = features.row(r);
        for i in 0..d {
            for j in 0..d {
                let v = cov.get(i, j) + (x[i] - mean[i]) * (x[j] - mean[j]);
                cov.set(i, j, v);
            }
        }
    }
    Ok((mean, cov.scale(1.0 / (n - 1) as f64)))
}

fn check_covariance(c: &Tensor, d: usize) -> Result<DMatrix<f64>> {
    if c.shape() != (d, d) {
        return Err(Error::InvalidCovariance(format!("shape {:?} for {d} dimensions", c.shape())));
    }
    let scale = c.max_abs().max(1.0);
    for i in 0..d {
        for j in 0..i {
            if (c.get(i, j) - c.get(j, i)).abs() > 1e-9 * scale {
                return Err(Error::InvalidCovariance(format!("asymmetric at ({i}, {j})")));
            }
        }
    }
    Ok(to_matrix(c))
}

/// Square root of a symmetric PSD matrix through its eigendecomposition.
fn psd_sqrt(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let e = SymmetricEigen::new(m);
    let mut vals = e.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < EIGEN_TOLERANCE {
            return Err(Error::InvalidCovariance(format!("negative eigenvalue {v}")));
        }
        *v = v.max(0.0).sqrt();
    }
    Ok(&e.eigenvectors * DMatrix::from_diagonal(&vals) * e.eigenvectors.transpose())
}

/// Fréchet distance between two Gaussians:
/// `‖μ1 − μ2‖² + Tr(Σ1 + Σ2 − 2(Σ1Σ2)^½)`.
///
/// The trace of `(Σ1Σ2)^½` is taken as that of `(Σ1^½ Σ2 Σ1^½)^½`, which
/// has the same eigenvalues and is symmetric.
pub fn fid(mean1: &[f64], cov1: &Tensor, mean2: &[f64], cov2: &Tensor) -> Result<f64> {
    let d = mean1.len();
    if mean2.len() != d {
        return Err(Error::Dim(format!("means of length {d} and {}", mean2.len())));
    }
    let (a, b) = (check_covariance(cov1, d)?, check_covariance(cov2, d)?);
    let mean_term: f64 = mean1.iter().zip(mean2).map(|(x, y)| (x - y) * (x - y)).sum();
    let ra = psd_sqrt(a.clone())?;
    let mid = &ra * &b * &ra;
    let mid = (&mid + mid.transpose()) * 0.5;
    let cross = psd_sqrt(mid)?.trace();
    Ok((mean_term + a.trace() + b.trace() - 2.0 * cross).max(0.0))
}

/// FID between two feature sets.
pub fn fid_features(a: &Tensor, b: &Tensor) -> Result<f64> {
    let (ma, ca) = feature_statistics(a)?;
    let (mb, cb) = feature_statistics(b)?;
    fid(&ma, &ca, &mb, &cb)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_paired(text: &Tensor, motion: &Tensor) -> Result<()> {
    if text.shape() != motion.shape() || text.rows() == 0 {
        return Err(Error::Dim(format!("paired features {:?} and {:?}", text.shape(), motion.shape())));
    }
    Ok(())
}

/// Fraction of texts whose own motion is among the `k` nearest motions of
/// its batch (Euclidean, ties to the lower index), for `k = 1, 2, 3`.
/// Batches are disjoint, seeded and of exactly `pool` pairs.
pub fn r_precision(text: &Tensor, motion: &Tensor, pool: usize, seed: u64) -> Result<RPrecision> {
    check_paired(text, motion)?;
    let n = text.rows();
    if pool == 0 || n < pool {
        return Err(Error::InsufficientSamples(format!("{n} pairs for a pool of {pool}")));
    }
    let mut hits = [0usize; 3];
    let mut queries = 0usize;
    for batch in seeded_permutation(n, seed).chunks_exact(pool) {
        for &q in batch {
            let own = distance(text.row(q), motion.row(q));
            let closer = batch
                .iter()
                .filter(|&&c| {
                    let d = distance(text.row(q), motion.row(c));
                    d < own || (d == own && c < q)
                })
                .count();
            for (k, h) in hits.iter_mut().enumerate() {
                *h += usize::from(closer <= k);
            }
            queries += 1;
        }
    }
    let f = |h: usize| h as f64 / queries as f64;
    Ok(RPrecision { top1: f(hits[0]), top2: f(hits[1]), top3: f(hits[2]) })
}

/// Mean distance between matched text and motion features.
pub fn mm_dist(text: &Tensor, motion: &Tensor) -> Result<f64> {
    check_paired(text, motion)?;
    let n = text.rows();
    Ok((0..n).map(|i| distance(text.row(i), motion.row(i))).sum::<f64>() / n as f64)
}

/// The `pairs` disjoint index pairs [`diversity`] averages over.
pub fn diversity_pairs(n: usize, pairs: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if pairs == 0 || n < 2 * pairs {
        return Err(Error::InsufficientSamples(format!("{n} samples for {pairs} disjoint pairs")));
    }
    let order = seeded_permutation(n, seed);
    Ok((0..pairs).map(|i| (order[2 * i], order[2 * i + 1])).collect())
}

/// Mean distance over `pairs` random disjoint pairs of rows.
pub fn diversity(features: &Tensor, pairs: usize, seed: u64) -> Result<f64> {
    let idx = diversity_pairs(features.rows(), pairs, seed)?;
    Ok(idx.iter().map(|&(a, b)| distance(features.row(a), features.row(b))).sum::<f64>() / pairs as f64)
}

/// Mean pairwise distance among the repeats of each caption, averaged over
/// captions. Each group holds the features of one caption's repeats.
pub fn mmodality(groups: &[Tensor]) -> Result<f64> {
    if groups.is_empty() {
        return Err(Error::InsufficientSamples("no caption groups".into()));
    }
    let mut total = 0.0;
    for g in groups {
        let r = g.rows();
        if r < 2 {
            return Err(Error::InsufficientSamples(format!("{r} repeats for a caption")));
        }
        let mut sum = 0.0;
        for i in 0..r {
            for j in i + 1..r {
                sum += distance(g.row(i), g.row(j));
            }
        }
        total += sum / (r * (r - 1) / 2) as f64;
    }
    Ok(total / groups.len() as f64)
}

/// Cosine between the motion embedding of `motion` and the global-level
/// embedding of `text`.
pub fn htma_s(align: &AlignmentModel, motion: &MotionSequence, text: &str) -> Result<f64> {
    let m = align.embed_motion(motion);
    let t = align.embed_caption(text)?;
    Ok(cosine_similarity(&m, &t))
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (cosine(a, a).sqrt(), cosine(b, b).sqrt());
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    cosine(a, b) / (na * nb)
}
