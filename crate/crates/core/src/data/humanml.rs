use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::corpus::{Corpus, CorpusEntry, Split};
use crate::annotation::{annotate_sequence, AnnotationClients};
use crate::error::{Error, Result};
use crate::formats::read_npy_matrix;
use crate::nn::Tensor;
use crate::representation::{GroupConnectivity, JointSkeleton, MotionSequence, FEATURE_DIM, FRAME_RATE};
use crate::rng::seeded_permutation;

/// One line of a caption file: `caption#tokens#start#end`.
#[derive(Clone, Debug, PartialEq)]
pub struct CaptionLine {
    pub caption: String,
    /// Segment bounds in seconds; `None` when the caption covers the whole sequence.
    pub segment: Option<(f64, f64)>,
}

pub fn parse_caption_line(line: &str) -> Option<CaptionLine> {
    let mut parts = line.trim().split('#');
    let caption = parts.next()?.trim().to_string();
    if caption.is_empty() {
        return None;
    }
    let _tokens = parts.next();
    let start = parts.next().and_then(|s| s.trim().parse::<f64>().ok()).filter(|v| v.is_finite());
    let end = parts.next().and_then(|s| s.trim().parse::<f64>().ok()).filter(|v| v.is_finite());
    let segment = match (start, end) {
        (Some(s), Some(e)) if !(s == 0.0 && e == 0.0) && e > s => Some((s, e)),
        _ => None,
    };
    Some(CaptionLine { caption, segment })
}

fn ingest_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Ingest { path: path.to_path_buf(), message: message.into() }
}

fn read_split_list(path: &Path) -> Result<Vec<String>> {
    Ok(fs::read_to_string(path)?.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

/// Layout of a HumanML3D-style directory.
#[derive(Clone, Debug)]
pub struct HumanMlLayout {
    pub motions: PathBuf,
    pub texts: PathBuf,
    pub root: PathBuf,
}

impl HumanMlLayout {
    pub fn new(root: &Path) -> Self {
        Self { motions: root.join("new_joint_vecs"), texts: root.join("texts"), root: root.to_path_buf() }
    }
}

/// Reads `new_joint_vecs/<id>.npy` (T×263) with captions from
/// `texts/<id>.txt`. Captions with a time segment become separate entries
/// cropped to that segment. Splits follow `train.txt`, `val.txt` and
/// `test.txt` when present, otherwise a seeded 80/5/15 split of the sorted ids.
/// Joint and interaction texts come from [`annotate_sequence`].
pub fn ingest_humanml3d(
    dir: &Path,
    clients: &AnnotationClients<'_>,
    keyframe_threshold: f64,
    seed: u64,
) -> Result<Corpus> {
    let layout = HumanMlLayout::new(dir);
    if !layout.motions.is_dir() {
        return Err(ingest_error(&layout.motions, "missing motion directory"));
    }
    let mut ids: Vec<String> = fs::read_dir(&layout.motions)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "npy"))
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    ids.sort();
    let splits = assign_splits(&layout.root, &ids, seed)?;
    let skeleton = JointSkeleton::smpl();
    let connectivity = GroupConnectivity::default();
    let mut entries = Vec::new();
    for id in &ids {
        let Some(&split) = splits.get(id) else { continue };
        let path = layout.motions.join(format!("{id}.npy"));
        let features = read_npy_matrix(&path)?;
        if features.cols() != FEATURE_DIM {
            return Err(ingest_error(&path, format!("row width {} ≠ {FEATURE_DIM}", features.cols())));
        }
        let motion = MotionSequence::new(features.clone()).map_err(|e| ingest_error(&path, e.to_string()))?;
        let tpath = layout.texts.join(format!("{id}.txt"));
        let lines: Vec<CaptionLine> = if tpath.exists() {
            fs::read_to_string(&tpath)?.lines().filter_map(parse_caption_line).collect()
        } else {
            Vec::new()
        };
        let whole: Vec<String> = lines.iter().filter(|l| l.segment.is_none()).map(|l| l.caption.clone()).collect();
        if !whole.is_empty() || lines.is_empty() {
            let annotation = annotate_sequence(&motion, &whole, &skeleton, &connectivity, clients, keyframe_threshold)?;
            entries.push(CorpusEntry { id: id.clone(), motion, annotation, constraint: None, split });
        }
        for (k, line) in lines.iter().filter(|l| l.segment.is_some()).enumerate() {
            let (s, e) = line.segment.expect("filtered");
            let t0 = (s * FRAME_RATE).floor() as usize;
            let t1 = ((e * FRAME_RATE).floor() as usize).min(features.rows());
            if t1 <= t0 + 1 {
                continue;
            }
            let crop = Tensor::concat_rows(&[&features.slice_rows(t0, t1 - t0)]);
            let seg = MotionSequence::new(crop).map_err(|e| ingest_error(&path, e.to_string()))?;
            let annotation = annotate_sequence(&seg, &[line.caption.clone()], &skeleton, &connectivity, clients, keyframe_threshold)?;
            entries.push(CorpusEntry { id: format!("{id}_seg{k}"), motion: seg, annotation, constraint: None, split });
        }
    }
    let meta = BTreeMap::from([("source".to_string(), "humanml3d".to_string()), ("seed".to_string(), seed.to_string())]);
    Ok(Corpus { entries, meta })
}

fn assign_splits(root: &Path, ids: &[String], seed: u64) -> Result<BTreeMap<String, Split>> {
    let lists = [(Split::Train, "train.txt"), (Split::Val, "val.txt"), (Split::Test, "test.txt")];
    let mut out = BTreeMap::new();
    if lists.iter().any(|(_, f)| root.join(f).exists()) {
        for (split, file) in lists {
            let path = root.join(file);
            if path.exists() {
                for id in read_split_list(&path)? {
                    out.insert(id, split);
                }
            }
        }
        return Ok(out);
    }
    let n = ids.len();
    let order = seeded_permutation(n, seed);
    let (n_train, n_val) = (n * 80 / 100, n * 5 / 100);
    for (rank, &i) in order.iter().enumerate() {
        let split = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
        out.insert(ids[i].clone(), split);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{HashingEmbedder, RulePoseDescriber, StubAnnotator};
    use crate::formats::write_npy_matrix;
    use crate::representation::RootState;

    fn fixture(dir: &Path, width: usize) {
        fs::create_dir_all(dir.join("new_joint_vecs")).unwrap();
        fs::create_dir_all(dir.join("texts")).unwrap();
        let s = JointSkeleton::smpl();
        let m = MotionSequence::from_kinematics(&vec![[crate::representation::rotation::IDENTITY_6D; 21]; 30], &RootState::still(30, 0.92), &s).unwrap();
        for id in ["000001", "000002"] {
            let mut f = m.features().clone();
            if width != FEATURE_DIM {
                f = Tensor::from_vec(30, width, f.data().chunks(FEATURE_DIM).flat_map(|r| r[..width].to_vec()).collect());
            }
            write_npy_matrix(&dir.join("new_joint_vecs").join(format!("{id}.npy")), &f).unwrap();
            fs::write(dir.join("texts").join(format!("{id}.txt")), "a person stands#a/DET person/NOUN stand/VERB#0.0#0.0\n").unwrap();
        }
        fs::write(dir.join("train.txt"), "000001\n").unwrap();
        fs::write(dir.join("test.txt"), "000002\n").unwrap();
    }

    fn clients_ingest(dir: &Path) -> Result<Corpus> {
        let (e, d, a) = (HashingEmbedder::default(), RulePoseDescriber, StubAnnotator::new());
        ingest_humanml3d(dir, &AnnotationClients { embedder: &e, describer: &d, annotator: &a }, 0.9, 0)
    }

    #[test]
    fn two_sequence_fixture() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path(), FEATURE_DIM);
        let c = clients_ingest(dir.path()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.entries[0].split, Split::Train);
        assert_eq!(c.entries[1].split, Split::Test);
        assert_eq!(c.entries[0].annotation.caption(), "a person stands");
        assert_eq!(c.entries[0].annotation.joint_texts.len(), 6);
    }

    #[test]
    fn narrow_rows_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path(), 262);
        match clients_ingest(dir.path()) {
            Err(Error::Ingest { path, message }) => {
                assert!(path.ends_with("000001.npy"), "{}", path.display());
                assert!(message.contains("262"));
            }
            other => panic!("expected an ingest error, got {other:?}"),
        }
    }

    #[test]
    fn caption_lines() {
        let l = parse_caption_line("a man kicks#a/DET man/NOUN#1.5#3.0").unwrap();
        assert_eq!(l.segment, Some((1.5, 3.0)));
        assert_eq!(parse_caption_line("walks#x#0.0#0.0").unwrap().segment, None);
        assert_eq!(parse_caption_line("walks#x#nan#nan").unwrap().segment, None);
        assert!(parse_caption_line("  ").is_none());
    }

    #[test]
    fn default_split_is_80_5_15() {
        let ids: Vec<String> = (0..100).map(|i| format!("{i:03}")).collect();
        let s = assign_splits(Path::new("/nonexistent"), &ids, 4).unwrap();
        let count = |x| s.values().filter(|&&v| v == x).count();
        assert_eq!((count(Split::Train), count(Split::Val), count(Split::Test)), (80, 5, 15));
    }
}
