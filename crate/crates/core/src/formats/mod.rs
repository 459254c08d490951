//! On-disk formats: KMOT motion arrays, side-car metadata, keypoint exports
//! and `.npy` ingestion.

mod keypoints;
mod kmot;
mod meta;
mod npy;

pub use keypoints::{parse_keypoints, write_keypoints, KeypointFrame};
pub use kmot::{decode_kmot, encode_kmot, read_kmot, read_motion, write_kmot, write_motion, KMOT_MAGIC, KMOT_VERSION};
pub use meta::{meta_path, parse_key_values, read_meta, write_key_values, write_meta, Metadata};
pub use npy::{read_npy_matrix, write_npy_matrix};
