//! Retrieval, generation, trajectory-control and editing metrics, and the
//! flat JSON reports they are written to.

pub mod control;
pub mod generation;
pub mod report;
pub mod retrieval;
pub mod suites;

pub use control::{constraint_metrics, control_metrics, ControlReport};
pub use generation::{
    cosine_similarity, diversity, diversity_pairs, feature_statistics, fid, fid_features, htma_s, mm_dist, mmodality,
    r_precision, GenerationReport, RPrecision,
};
pub use report::Report;
pub use retrieval::{dissimilar_subset, retrieval_report, Direction, RetrievalProtocol, RetrievalReport, RECALL_KS};
pub use suites::{caption_similarities, control_suite, editing_suite, generation_suite, retrieval_suite, FEATURE_EXTRACTOR};
