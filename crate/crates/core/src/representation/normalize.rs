use crate::error::{Error, Result};
use crate::nn::Tensor;

use super::motion::FEATURE_DIM;

/// Feature standard deviations below this are treated as this value.
pub const MIN_STD: f64 = 1e-2;

/// Per-dimension z-scoring of motion features.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureNormalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureNormalizer {
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    /// Mean and standard deviation over every frame of every motion.
    pub fn fit<'a>(motions: impl IntoIterator<Item = &'a Tensor>) -> Result<Self> {
        let mut sum = vec![0.0; FEATURE_DIM];
        let mut sq = vec![0.0; FEATURE_DIM];
        let mut n = 0usize;
        for m in motions {
            if m.cols() != FEATURE_DIM {
                return Err(Error::InvalidMotion(format!("expected {FEATURE_DIM} columns, found {}", m.cols())));
            }
            for r in 0..m.rows() {
                for (c, &x) in m.row(r).iter().enumerate() {
                    sum[c] += x;
                    sq[c] += x * x;
                }
            }
            n += m.rows();
        }
        if n == 0 {
            return Err(Error::InsufficientSamples("no frames to fit a normalizer".into()));
        }
        // Rounded to f32 so a checkpointed normalizer is exact.
        let mean: Vec<f64> = sum.iter().map(|s| (s / n as f64) as f32 as f64).collect();
        let std = sq.iter().zip(&mean).map(|(s, m)| (s / n as f64 - m * m).max(0.0).sqrt().max(MIN_STD) as f32 as f64).collect();
        Ok(Self { mean, std })
    }

    pub fn normalize(&self, t: &Tensor) -> Tensor {
        let mut out = t.clone();
        for r in 0..out.rows() {
            for ((x, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *x = (*x - m) / s;
            }
        }
        out
    }

    pub fn denormalize(&self, t: &Tensor) -> Tensor {
        let mut out = t.clone();
        for r in 0..out.rows() {
            for ((x, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *x = *x * s + m;
            }
        }
        out
    }

    /// Mean and std as a 2×D tensor, for checkpoints.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_rows(&[self.mean.clone(), self.std.clone()])
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        if t.rows() != 2 || t.data().iter().skip(t.cols()).any(|&s| s <= 0.0) {
            return Err(Error::format("normalizer", "expected a 2×D tensor with positive std"));
        }
        Ok(Self { mean: t.row(0).to_vec(), std: t.row(1).to_vec() })
    }
}
