//! Kinematic-group motion modeling: body-part decomposition of motions,
//! hierarchical text–motion alignment, coarse-to-fine masked generation,
//! mask-based editing, trajectory control, and the matching metrics.
//!
//! The crate is organized bottom-up:
//!
//! * [`representation`]: skeleton, 6D rotations, the 263-dimensional
//!   feature layout, forward kinematics and group decomposition.
//! * [`annotation`]: keyframe selection, windowed motion summaries and the
//!   hierarchical annotation record with pluggable text clients.
//! * [`alignment`]: three-level text encoders, motion encoder/decoder and
//!   the contrastive training loop.
//! * [`generation`]: residual-quantized tokenizer, masked generator,
//!   coarse-to-fine sampling and editing.
//! * [`control`]: trajectory constraints, spatial encoder and the
//!   trainable control branch.
//! * [`eval`]: retrieval, generation, control and editing metrics.
//! * [`data`], [`formats`], [`checkpoint`], [`config`]: corpora, file
//!   formats and persistence.

pub mod alignment;
pub mod annotation;
pub mod checkpoint;
pub mod config;
pub mod control;
pub mod data;
pub mod error;
pub mod eval;
pub mod formats;
pub mod generation;
pub mod nn;
pub mod representation;
pub mod rng;

pub use error::{Error, Result};
