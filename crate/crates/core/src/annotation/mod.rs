//! Keyframe selection, windowed motion summaries, text clients and the
//! hierarchical annotation record.

mod clients;
mod keyframes;
mod pipeline;
mod record;
mod window;

pub(crate) use clients::fnv1a;
pub use clients::{
    cosine, tokenize, AnnotationRequest, AnnotatorClient, AuditEntry, AuditLog, HashingEmbedder, PoseDescriber,
    RemoteAnnotator, RulePoseDescriber, StubAnnotator, TextEmbedder, API_KEY_ENV,
};
pub use keyframes::{select_keyframes, KeyframeSet, DEFAULT_KEYFRAME_THRESHOLD};
pub use pipeline::{annotate_sequence, AnnotationClients};
pub use record::{swap_left_right, HierarchicalAnnotation};
pub use window::{summarize_group, summarize_pair, window_motion_estimate, Axis, PairWindowSummary, WindowSummary};
