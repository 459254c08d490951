use crate::error::{Error, Result};

/// Default cosine threshold below which a frame starts a new keyframe.
pub const DEFAULT_KEYFRAME_THRESHOLD: f64 = 0.9;

const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct KeyframeSet {
    /// Strictly increasing, always starting at 0.
    pub indices: Vec<usize>,
    pub threshold_used: f64,
}

impl KeyframeSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Consecutive keyframe windows, with a trailing window up to the last
    /// frame when the last keyframe is not the final frame.
    pub fn windows(&self, frames: usize) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self.indices.windows(2).map(|w| (w[0], w[1])).collect();
        let last = *self.indices.last().expect("keyframe set is never empty");
        if last + 1 < frames {
            out.push((last, frames - 1));
        }
        out
    }
}

/// Marks frame 0 as a keyframe, then every frame whose cosine similarity to
/// the most recent keyframe falls below `threshold`.
pub fn select_keyframes(embeddings: &[Vec<f64>], threshold: f64) -> Result<KeyframeSet> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!("keyframe threshold {threshold} outside (0, 1)")));
    }
    if embeddings.is_empty() {
        return Err(Error::InvalidEmbedding("no frames".into()));
    }
    let dim = embeddings[0].len();
    for (t, e) in embeddings.iter().enumerate() {
        if e.len() != dim {
            return Err(Error::InvalidEmbedding(format!("frame {t} has dimension {}, expected {dim}", e.len())));
        }
        let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::InvalidEmbedding(format!("frame {t} has norm {norm}")));
        }
    }
    let mut indices = vec![0];
    let mut anchor = 0;
    for t in 1..embeddings.len() {
        let cos: f64 = embeddings[anchor].iter().zip(&embeddings[t]).map(|(a, b)| a * b).sum();
        if cos < threshold {
            indices.push(t);
            anchor = t;
        }
    }
    Ok(KeyframeSet { indices, threshold_used: threshold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(v: &[f64]) -> Vec<f64> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / n).collect()
    }

    #[test]
    fn identical_rows_give_single_keyframe() {
        let e = vec![unit(&[1.0, 2.0]); 6];
        assert_eq!(select_keyframes(&e, 0.9).unwrap().indices, vec![0]);
    }

    #[test]
    fn compares_against_last_keyframe() {
        let a = vec![1.0, 0.0];
        let b = vec![0.0, 1.0];
        let e = vec![a.clone(), a.clone(), a.clone(), b, a];
        assert_eq!(select_keyframes(&e, 0.9).unwrap().indices, vec![0, 3, 4]);
    }

    #[test]
    fn rejects_non_unit_rows_and_bad_threshold() {
        let e = vec![vec![1.0, 1.0]];
        assert!(matches!(select_keyframes(&e, 0.9), Err(Error::InvalidEmbedding(_))));
        let e = vec![vec![1.0, 0.0]];
        assert!(select_keyframes(&e, 1.0).is_err());
        assert!(select_keyframes(&e, 0.0).is_err());
    }

    #[test]
    fn windows_cover_sequence() {
        let k = KeyframeSet { indices: vec![0, 3, 4], threshold_used: 0.9 };
        assert_eq!(k.windows(8), vec![(0, 3), (3, 4), (4, 7)]);
        let k = KeyframeSet { indices: vec![0], threshold_used: 0.9 };
        assert_eq!(k.windows(1), vec![]);
    }

    proptest! {
        #[test]
        fn appending_copies_of_last_keyframe_adds_nothing(
            raw in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 4), 1..12),
            extra in 1usize..5,
            theta in 0.05f64..0.95,
        ) {
            let rows: Vec<Vec<f64>> = raw.iter().filter(|r| r.iter().any(|x| x.abs() > 1e-3)).map(|r| unit(r)).collect();
            prop_assume!(!rows.is_empty());
            let base = select_keyframes(&rows, theta).unwrap();
            let last = rows[*base.indices.last().unwrap()].clone();
            let mut longer = rows.clone();
            longer.extend(std::iter::repeat(last).take(extra));
            prop_assert_eq!(select_keyframes(&longer, theta).unwrap().indices, base.indices);
        }

        #[test]
        fn threshold_near_one_flags_every_generic_frame(
            raw in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 8), 2..10),
        ) {
            let rows: Vec<Vec<f64>> = raw.iter().map(|r| unit(r)).collect();
            let distinct = rows.windows(2).all(|w| w[0].iter().zip(&w[1]).map(|(a, b)| a * b).sum::<f64>() < 1.0 - 1e-9);
            prop_assume!(distinct);
            let k = select_keyframes(&rows, 1.0 - 1e-12).unwrap();
            prop_assert_eq!(k.indices, (0..rows.len()).collect::<Vec<_>>());
        }
    }
}
