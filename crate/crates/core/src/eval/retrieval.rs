use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng::seeded_permutation;

/// Cutoffs reported by [`RetrievalReport::recall_at`].
pub const RECALL_KS: [usize; 5] = [1, 2, 3, 5, 10];

/// How queries and galleries are formed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RetrievalProtocol {
    /// Every item against every other.
    All,
    /// As `All`, but a retrieved item also counts when its text similarity
    /// to the query's ground truth is at least the threshold.
    AllThreshold(f64),
    /// Only the `n` items whose texts are least similar to any other text.
    DissimilarSubset(usize),
    /// Disjoint seeded batches of `size`; ranks pooled over batches.
    SmallBatches { size: usize, seed: u64 },
}

impl RetrievalProtocol {
    pub fn name(&self) -> &'static str {
        match self {
            Self::All => "all",
            Self::AllThreshold(_) => "all_threshold",
            Self::DissimilarSubset(_) => "dissimilar_subset",
            Self::SmallBatches { .. } => "small_batches",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Direction {
    TextToMotion,
    MotionToText,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::TextToMotion => "text_to_motion",
            Self::MotionToText => "motion_to_text",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RetrievalReport {
    pub direction: Direction,
    /// Percentage of queries whose first correct item is within the top k.
    pub recall_at: BTreeMap<usize, f64>,
    pub med_rank: f64,
}

impl RetrievalReport {
    /// Recalls at [`RECALL_KS`] and the median of 1-based `ranks`.
    pub fn from_ranks(direction: Direction, ranks: &[usize]) -> Result<Self> {
        if ranks.is_empty() {
            return Err(Error::InsufficientSamples("no retrieval queries".into()));
        }
        let n = ranks.len() as f64;
        let recall_at = RECALL_KS.iter().map(|&k| (k, 100.0 * ranks.iter().filter(|&&r| r <= k).count() as f64 / n)).collect();
        Ok(Self { direction, recall_at, med_rank: median(ranks) })
    }

    pub fn recall(&self, k: usize) -> f64 {
        self.recall_at.get(&k).copied().unwrap_or(f64::NAN)
    }
}

fn median(ranks: &[usize]) -> f64 {
    let mut v = ranks.to_vec();
    v.sort_unstable();
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m] as f64
    } else {
        (v[m - 1] + v[m]) as f64 / 2.0
    }
}

/// 1-based position of the first correct gallery item when `scores` is sorted
/// descending, ties going to the lower index.
fn first_correct_rank(scores: &[f64], correct: impl Fn(usize) -> bool) -> usize {
    // Adding 0.0 maps -0.0 to 0.0 so the two tie.
    let key = |i: usize| scores[i] + 0.0;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
    order.iter().position(|&i| correct(i)).map_or(scores.len() + 1, |p| p + 1)
}

/// Ranks of every query within the sub-gallery `items` of `s`, where
/// `s[t][m]` scores text `t` against motion `m`.
fn ranks_over(s: &Tensor, items: &[usize], direction: Direction, threshold: Option<(&Tensor, f64)>) -> Vec<usize> {
    let score = |q: usize, c: usize| match direction {
        Direction::TextToMotion => s.get(q, c),
        Direction::MotionToText => s.get(c, q),
    };
    items
        .iter()
        .map(|&q| {
            let scores: Vec<f64> = items.iter().map(|&c| score(q, c)).collect();
            first_correct_rank(&scores, |k| {
                let c = items[k];
                c == q || threshold.is_some_and(|(ts, th)| ts.get(q, c) >= th)
            })
        })
        .collect()
}

/// Text-to-motion and motion-to-text reports for a square similarity matrix
/// whose diagonal holds the ground-truth pairs.
pub fn retrieval_report(
    s: &Tensor,
    protocol: RetrievalProtocol,
    text_sims: Option<&Tensor>,
) -> Result<[RetrievalReport; 2]> {
    let n = s.rows();
    if n == 0 || s.cols() != n {
        return Err(Error::Dim(format!("similarity matrix must be square and nonempty, got {:?}", s.shape())));
    }
    if let Some(ts) = text_sims {
        if ts.shape() != (n, n) {
            return Err(Error::Dim(format!("text similarities {:?} against {n} items", ts.shape())));
        }
    }
    let need_sims = || text_sims.ok_or_else(|| Error::InvalidArgument(format!("{} needs text similarities", protocol.name())));
    let all: Vec<usize> = (0..n).collect();
    let report = |d: Direction| -> Result<RetrievalReport> {
        let ranks = match protocol {
            RetrievalProtocol::All => ranks_over(s, &all, d, None),
            RetrievalProtocol::AllThreshold(th) => {
                if !(th > 0.0) {
                    return Err(Error::InvalidArgument(format!("threshold must be positive, got {th}")));
                }
                ranks_over(s, &all, d, Some((need_sims()?, th)))
            }
            RetrievalProtocol::DissimilarSubset(k) => {
                if k == 0 {
                    return Err(Error::InvalidArgument("subset size must be positive".into()));
                }
                ranks_over(s, &dissimilar_subset(need_sims()?, k), d, None)
            }
            RetrievalProtocol::SmallBatches { size, seed } => {
                if size == 0 || size > n {
                    return Err(Error::InsufficientSamples(format!("batches of {size} from {n} items")));
                }
                let order = seeded_permutation(n, seed);
                order.chunks_exact(size).flat_map(|batch| ranks_over(s, batch, d, None)).collect()
            }
        };
        RetrievalReport::from_ranks(d, &ranks)
    };
    Ok([report(Direction::TextToMotion)?, report(Direction::MotionToText)?])
}

/// The `k` items whose highest text similarity to another item is lowest,
/// in index order.
pub fn dissimilar_subset(text_sims: &Tensor, k: usize) -> Vec<usize> {
    let n = text_sims.rows();
    let nearest: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| text_sims.get(i, j)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| nearest[a].total_cmp(&nearest[b]).then(a.cmp(&b)));
    order.truncate(k.min(n));
    order.sort_unstable();
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_rank(s: &Tensor, q: usize, d: Direction) -> usize {
        let n = s.rows();
        let v = |c: usize| if d == Direction::TextToMotion { s.get(q, c) } else { s.get(c, q) };
        1 + (0..n).filter(|&c| v(c) > v(q) || (v(c) == v(q) && c < q)).count()
    }

    #[test]
    fn identity_is_perfect() {
        let [t2m, m2t] = retrieval_report(&Tensor::identity(6), RetrievalProtocol::All, None).unwrap();
        for r in [t2m, m2t] {
            assert_eq!(r.recall(1), 100.0);
            assert_eq!(r.med_rank, 1.0);
        }
    }

    #[test]
    fn hand_three_by_three() {
        // Ground truth ranks 1, 2, 3 for the three text queries.
        let s = Tensor::from_rows(&[vec![0.9, 0.1, 0.0], vec![0.1, 0.5, 0.8], vec![0.9, 0.7, 0.3]]);
        let [t2m, _] = retrieval_report(&s, RetrievalProtocol::All, None).unwrap();
        assert!((t2m.recall(1) - 33.3).abs() < 0.05);
        assert!((t2m.recall(2) - 66.7).abs() < 0.05);
        assert_eq!(t2m.recall(3), 100.0);
        assert_eq!(t2m.med_rank, 2.0);
    }

    #[test]
    fn ties_go_to_the_lower_index() {
        let s = Tensor::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
        let [t2m, m2t] = retrieval_report(&s, RetrievalProtocol::All, None).unwrap();
        assert_eq!(t2m.recall(1), 50.0);
        assert_eq!(m2t.recall(1), 50.0);
    }

    #[test]
    fn threshold_with_identical_texts_always_hits() {
        let s = Tensor::from_rows(&[vec![0.0, 1.0, 2.0], vec![3.0, 0.0, 1.0], vec![1.0, 2.0, 0.0]]);
        let ones = Tensor::from_vec(3, 3, vec![1.0; 9]);
        let [t2m, m2t] = retrieval_report(&s, RetrievalProtocol::AllThreshold(0.8), Some(&ones)).unwrap();
        assert_eq!((t2m.recall(1), m2t.recall(1)), (100.0, 100.0));
        assert!(retrieval_report(&s, RetrievalProtocol::AllThreshold(0.8), None).is_err());
        assert!(retrieval_report(&s, RetrievalProtocol::DissimilarSubset(2), None).is_err());
    }

    #[test]
    fn dissimilar_subset_picks_isolated_texts() {
        let ts = Tensor::from_rows(&[
            vec![1.0, 0.9, 0.1, 0.2],
            vec![0.9, 1.0, 0.3, 0.1],
            vec![0.1, 0.3, 1.0, 0.0],
            vec![0.2, 0.1, 0.0, 1.0],
        ]);
        assert_eq!(dissimilar_subset(&ts, 2), vec![2, 3]);
        let s = Tensor::identity(4);
        let [t2m, _] = retrieval_report(&s, RetrievalProtocol::DissimilarSubset(2), Some(&ts)).unwrap();
        assert_eq!(t2m.recall(1), 100.0);
    }

    #[test]
    fn small_batches_pool_ranks() {
        let s = Tensor::identity(70);
        let [t2m, _] = retrieval_report(&s, RetrievalProtocol::SmallBatches { size: 32, seed: 3 }, None).unwrap();
        assert_eq!(t2m.recall(1), 100.0);
        assert!(retrieval_report(&Tensor::identity(8), RetrievalProtocol::SmallBatches { size: 32, seed: 3 }, None).is_err());
        assert!(retrieval_report(&Tensor::zeros(2, 3), RetrievalProtocol::All, None).is_err());
    }

    proptest! {
        #[test]
        fn ranks_match_brute_force(v in proptest::collection::vec(-1.0..1.0f64, 100), round in proptest::bool::ANY) {
            let v: Vec<f64> = if round { v.iter().map(|x| (x * 3.0).round()).collect() } else { v };
            let s = Tensor::from_vec(10, 10, v);
            let all: Vec<usize> = (0..10).collect();
            for d in [Direction::TextToMotion, Direction::MotionToText] {
                let ranks = ranks_over(&s, &all, d, None);
                for q in 0..10 {
                    prop_assert_eq!(ranks[q], brute_rank(&s, q, d));
                }
                let r = RetrievalReport::from_ranks(d, &ranks).unwrap();
                let recalls: Vec<f64> = r.recall_at.values().copied().collect();
                prop_assert!(recalls.windows(2).all(|w| w[0] <= w[1]));
                prop_assert!(r.med_rank >= 1.0);
            }
        }
    }
}
