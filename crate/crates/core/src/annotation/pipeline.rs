use std::collections::BTreeMap;

use super::clients::{AnnotationRequest, AnnotatorClient, PoseDescriber, TextEmbedder};
use super::keyframes::select_keyframes;
use super::record::HierarchicalAnnotation;
use super::window::{summarize_group, summarize_pair, WindowSummary};
use crate::error::{Error, Result};
use crate::representation::{decompose, GroupConnectivity, JointSkeleton, MotionSequence};

pub struct AnnotationClients<'a> {
    pub embedder: &'a dyn TextEmbedder,
    pub describer: &'a dyn PoseDescriber,
    pub annotator: &'a dyn AnnotatorClient,
}

/// Builds the three-level annotation for one motion.
///
/// Keyframes come from per-frame pose descriptions; each group and pair is
/// summarized over consecutive keyframe windows and sent to the annotator.
/// When `captions` is empty the global text is assembled from the joint texts.
pub fn annotate_sequence(
    motion: &MotionSequence,
    captions: &[String],
    skeleton: &JointSkeleton,
    connectivity: &GroupConnectivity,
    clients: &AnnotationClients<'_>,
    keyframe_threshold: f64,
) -> Result<HierarchicalAnnotation> {
    let frames = motion.frames();
    if frames == 0 {
        return Err(Error::InvalidMotion("empty motion".into()));
    }
    let pose_texts: Vec<String> = motion.body_positions().iter().map(|p| clients.describer.describe_pose(p)).collect();
    let embeddings: Vec<Vec<f64>> = pose_texts.iter().map(|t| clients.embedder.embed(t)).collect();
    let keyframes = select_keyframes(&embeddings, keyframe_threshold)?;
    let windows = keyframes.windows(frames);
    let key_texts: Vec<String> = keyframes.indices.iter().map(|&k| pose_texts[k].clone()).collect();
    let decomposition = decompose(motion, skeleton, connectivity)?;

    let mut joint_texts = BTreeMap::new();
    for (&group, features) in &decomposition.groups {
        let summaries = if windows.is_empty() {
            vec![WindowSummary::zero(0)]
        } else {
            windows.iter().map(|&w| summarize_group(features, w)).collect::<Result<_>>()?
        };
        let request = AnnotationRequest::Joint { group, windows: summaries, pose_texts: key_texts.clone() };
        joint_texts.insert(group, clients.annotator.describe(&request)?);
    }
    let mut interaction_texts = BTreeMap::new();
    for (&pair, features) in &decomposition.pairs {
        let summaries = windows.iter().map(|&w| summarize_pair(features, w)).collect::<Result<_>>()?;
        let request = AnnotationRequest::Interaction { pair, windows: summaries, pose_texts: key_texts.clone() };
        interaction_texts.insert(pair, clients.annotator.describe(&request)?);
    }
    let global_texts = if captions.is_empty() {
        let moving: Vec<&str> =
            joint_texts.values().filter(|t| !t.ends_with("remains still")).map(String::as_str).collect();
        if moving.is_empty() {
            vec!["a person stands still".to_string()]
        } else {
            vec![format!("a person moves: {}", moving.join("; "))]
        }
    } else {
        captions.to_vec()
    };
    HierarchicalAnnotation::new(global_texts, joint_texts, interaction_texts)
}
