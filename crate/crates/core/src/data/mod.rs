//! Corpora: the on-disk corpus layout, the procedural toy corpus, HumanML3D
//! ingestion and mirror augmentation.

pub mod corpus;
pub mod humanml;
pub mod mirror;
pub mod toy;

pub use corpus::{Corpus, CorpusEntry, Split};
pub use humanml::{ingest_humanml3d, parse_caption_line, CaptionLine};
pub use mirror::{mirror_augment, mirror_constraint, mirror_entry};
pub use toy::{make_toy_corpus, make_toy_data, ToyCorpusSpec, ToyFamily};
