use super::corpus::{Corpus, CorpusEntry};
use crate::control::TrajectoryConstraint;
use crate::representation::skeleton::MIRROR_PAIRS;
use crate::representation::Vec3;

/// Reflects constraint targets across the sagittal plane and swaps the
/// left/right joint columns.
pub fn mirror_constraint(c: &TrajectoryConstraint) -> TrajectoryConstraint {
    let mut out = c.clone();
    for t in 0..c.frames() {
        for (a, b) in MIRROR_PAIRS {
            out.mask[t].swap(a, b);
            out.targets[t].swap(a, b);
        }
        for p in out.targets[t].iter_mut() {
            *p = Vec3::new(-p.x, p.y, p.z);
        }
    }
    out
}

/// Left/right mirrored copy of an entry, with id prefixed by `M`.
pub fn mirror_entry(e: &CorpusEntry) -> CorpusEntry {
    CorpusEntry {
        id: format!("M{}", e.id),
        motion: e.motion.mirrored(),
        annotation: e.annotation.mirrored(),
        constraint: e.constraint.as_ref().map(mirror_constraint),
        split: e.split,
    }
}

/// The corpus followed by a mirrored copy of every entry.
pub fn mirror_augment(corpus: &Corpus) -> Corpus {
    let mut out = corpus.clone();
    out.entries.extend(corpus.entries.iter().map(mirror_entry));
    out.meta.insert("mirrored".into(), "true".into());
    out
}
