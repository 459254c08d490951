use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::annotation::HierarchicalAnnotation;
use crate::control::TrajectoryConstraint;
use crate::error::{Error, Result};
use crate::formats::{parse_key_values, read_motion, write_key_values, write_motion, Metadata};
use crate::representation::MotionSequence;

pub const CORPUS_FORMAT: &str = "kinmo-corpus";
pub const CORPUS_VERSION: &str = "1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::format("corpus", format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusEntry {
    pub id: String,
    pub motion: MotionSequence,
    pub annotation: HierarchicalAnnotation,
    pub constraint: Option<TrajectoryConstraint>,
    pub split: Split,
}

/// Motions with their annotations, in a fixed order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    pub entries: Vec<CorpusEntry>,
    /// Free-form provenance written to `corpus.meta`.
    pub meta: Metadata,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &CorpusEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// `(motion, annotation)` pairs of one split, cloned for training.
    pub fn pairs(&self, split: Split) -> Vec<(MotionSequence, HierarchicalAnnotation)> {
        self.split(split).map(|e| (e.motion.clone(), e.annotation.clone())).collect()
    }

    /// Writes `corpus.meta`, `index.txt` and one motion, annotation and
    /// optional constraint file per entry.
    pub fn write(&self, dir: &Path) -> Result<()> {
        for sub in ["motions", "annotations", "constraints"] {
            fs::create_dir_all(dir.join(sub))?;
        }
        let mut meta = self.meta.clone();
        meta.insert("format".into(), CORPUS_FORMAT.into());
        meta.insert("version".into(), CORPUS_VERSION.into());
        meta.insert("entries".into(), self.len().to_string());
        write_meta_file(&dir.join("corpus.meta"), &meta)?;
        let mut index = String::new();
        for e in &self.entries {
            check_id(&e.id)?;
            index.push_str(&format!("{} {}\n", e.id, e.split));
            write_motion(&dir.join("motions").join(format!("{}.kmot", e.id)), &e.motion)?;
            fs::write(dir.join("annotations").join(format!("{}.txt", e.id)), e.annotation.to_text())?;
            if let Some(c) = &e.constraint {
                c.write(&dir.join("constraints").join(format!("{}.traj", e.id)))?;
            }
        }
        fs::write(dir.join("index.txt"), index)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let meta = read_meta_file(&dir.join("corpus.meta"))?;
        if meta.get("format").map(String::as_str) != Some(CORPUS_FORMAT) {
            return Err(Error::format("corpus", format!("{} is not a corpus directory", dir.display())));
        }
        let index = fs::read_to_string(dir.join("index.txt"))?;
        let mut entries = Vec::new();
        for (n, line) in index.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (id, split) = line
                .split_once(' ')
                .ok_or_else(|| Error::format("corpus", format!("index.txt line {}: expected `id split`", n + 1)))?;
            let motion = read_motion(&dir.join("motions").join(format!("{id}.kmot")))?;
            let annotation = HierarchicalAnnotation::parse(&fs::read_to_string(dir.join("annotations").join(format!("{id}.txt")))?)?;
            let cpath = dir.join("constraints").join(format!("{id}.traj"));
            let constraint = if cpath.exists() {
                let c = TrajectoryConstraint::read(&cpath)?;
                if c.frames() != motion.frames() {
                    return Err(Error::format("corpus", format!("{id}: constraint has {} frames, motion {}", c.frames(), motion.frames())));
                }
                Some(c)
            } else {
                None
            };
            entries.push(CorpusEntry { id: id.to_string(), motion, annotation, constraint, split: split.trim().parse()? });
        }
        if meta.get("entries").and_then(|v| v.parse::<usize>().ok()) != Some(entries.len()) {
            return Err(Error::format("corpus", "entry count differs from corpus.meta"));
        }
        let mut meta = meta;
        for k in ["format", "version", "entries"] {
            meta.remove(k);
        }
        Ok(Self { entries, meta })
    }
}

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Err(Error::format("corpus", format!("invalid entry id {id:?}")));
    }
    Ok(())
}

fn write_meta_file(path: &Path, meta: &Metadata) -> Result<()> {
    let text = write_key_values(meta.iter().map(|(k, v)| (k.as_str(), v.as_str())));
    fs::write(path, text)?;
    Ok(())
}

fn read_meta_file(path: &Path) -> Result<Metadata> {
    let text = fs::read_to_string(path)?;
    Ok(parse_key_values(&text, "corpus")?.into_iter().collect())
}
