use std::collections::BTreeMap;

use crate::alignment::{similarity_matrix, AlignmentModel, TextLevel};
use crate::annotation::{cosine, HierarchicalAnnotation, TextEmbedder};
use crate::config::EvalConfig;
use crate::control::TrajectoryConstraint;
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::representation::MotionSequence;

use super::control::constraint_metrics;
use super::generation::{diversity, fid_features, htma_s, mm_dist, mmodality, r_precision, GenerationReport};
use super::report::Report;
use super::retrieval::{retrieval_report, RetrievalProtocol};

/// Recorded in every report that embeds motions or texts.
pub const FEATURE_EXTRACTOR: &str = "kinmo alignment encoders (motion latent mean, global text latent mean)";

fn rows(v: Vec<Vec<f64>>) -> Tensor {
    Tensor::from_rows(&v)
}

/// Caption-embedding cosine similarities, used by the threshold and
/// dissimilar-subset protocols.
pub fn caption_similarities(captions: &[&str], embedder: &dyn TextEmbedder) -> Tensor {
    let e: Vec<Vec<f64>> = captions.iter().map(|c| embedder.embed(c)).collect();
    let n = e.len();
    let mut s = Tensor::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s.set(i, j, cosine(&e[i], &e[j]));
        }
    }
    s
}

/// Every retrieval protocol at every text level, keyed
/// `<level>.<protocol>.<direction>.<metric>`. Small-batch retrieval is
/// skipped, with a note, when there are fewer pairs than one batch.
pub fn retrieval_suite(
    align: &AlignmentModel,
    pairs: &[(MotionSequence, HierarchicalAnnotation)],
    embedder: &dyn TextEmbedder,
    config: &EvalConfig,
    seed: u64,
) -> Result<Report> {
    if pairs.is_empty() {
        return Err(Error::InsufficientSamples("retrieval needs at least one pair".into()));
    }
    let motions = rows(pairs.iter().map(|(m, _)| align.embed_motion(m)).collect());
    let captions: Vec<&str> = pairs.iter().map(|(_, a)| a.caption()).collect();
    let text_sims = caption_similarities(&captions, embedder);
    let mut protocols = vec![
        RetrievalProtocol::All,
        RetrievalProtocol::AllThreshold(config.retrieval_threshold),
        RetrievalProtocol::DissimilarSubset(config.dissimilar_n),
    ];
    let mut report = Report::new();
    if pairs.len() >= config.batch_size {
        protocols.push(RetrievalProtocol::SmallBatches { size: config.batch_size, seed });
    } else {
        report.note("small_batches", format!("skipped: {} pairs, batch size {}", pairs.len(), config.batch_size));
    }
    for level in TextLevel::ALL {
        let texts = rows(pairs.iter().map(|(_, a)| align.embed_text(a, level)).collect::<Result<_>>()?);
        let s = similarity_matrix(&texts, &motions)?;
        for &p in &protocols {
            let reps = retrieval_report(&s, p, Some(&text_sims))?;
            let mut sub = Report::new();
            sub.add_retrieval(p, &reps);
            for (k, v) in sub.metrics {
                report.set(format!("{level}.{k}"), v);
            }
        }
    }
    report.set("pairs", pairs.len() as f64);
    report.note("suite", "retrieval");
    report.note("feature_extractor", FEATURE_EXTRACTOR);
    report.note("med_rank", "median of ranks pooled over all queries (and batches)");
    report.note("ties", "lower index ranks first");
    Ok(report)
}

/// Generated motions (with the text each was generated from) against
/// reference motions. Pool and pair counts shrink to what the sample allows
/// and are reported; MModality uses texts that were generated at least twice.
pub fn generation_suite(
    align: &AlignmentModel,
    generated: &[(MotionSequence, String)],
    reference: &[MotionSequence],
    config: &EvalConfig,
    seed: u64,
) -> Result<Report> {
    if generated.len() < 2 || reference.len() < 2 {
        return Err(Error::InsufficientSamples("generation metrics need at least two generated and two reference motions".into()));
    }
    let gen = rows(generated.iter().map(|(m, _)| align.embed_motion(m)).collect());
    let refs = rows(reference.iter().map(|m| align.embed_motion(m)).collect());
    let texts = rows(generated.iter().map(|(_, t)| align.embed_caption(t)).collect::<Result<_>>()?);
    let n = generated.len();
    let pool = config.batch_size.min(n);
    let pairs = config.diversity_pairs.min(n / 2);
    let mut groups: BTreeMap<&str, Vec<Vec<f64>>> = BTreeMap::new();
    for (i, (_, t)) in generated.iter().enumerate() {
        groups.entry(t.as_str()).or_default().push(gen.row(i).to_vec());
    }
    let repeated: Vec<Tensor> = groups.into_values().filter(|g| g.len() >= 2).map(rows).collect();
    let mut report = Report::new();
    let mmod = if repeated.is_empty() {
        report.note("mmodality_note", "no text was generated twice");
        f64::NAN
    } else {
        mmodality(&repeated)?
    };
    let r = GenerationReport {
        fid: fid_features(&refs, &gen)?,
        r_precision: r_precision(&texts, &gen, pool, seed)?,
        mm_dist: mm_dist(&texts, &gen)?,
        diversity: diversity(&gen, pairs, seed)?,
        mmodality: mmod,
    };
    report.add_generation(&r);
    report.set("r_precision_pool", pool as f64);
    report.set("diversity_pairs", pairs as f64);
    report.set("generated", n as f64);
    report.set("reference", reference.len() as f64);
    report.note("suite", "generation");
    report.note("feature_extractor", FEATURE_EXTRACTOR);
    Ok(report)
}

/// Control errors of motions against their constraints.
pub fn control_suite(motions: &[MotionSequence], constraints: &[TrajectoryConstraint], config: &EvalConfig) -> Result<Report> {
    let r = constraint_metrics(motions, constraints, config.control_threshold)?;
    let mut report = Report::new();
    report.add_control(&r);
    report.set("threshold_m", config.control_threshold);
    report.set("samples", motions.len() as f64);
    report.note("suite", "control");
    Ok(report)
}

/// Mean HTMA-S of edited motions against the texts they were edited toward.
pub fn editing_suite(align: &AlignmentModel, edited: &[(MotionSequence, String)]) -> Result<Report> {
    if edited.is_empty() {
        return Err(Error::InsufficientSamples("no edited motions".into()));
    }
    let scores: Vec<f64> = edited.iter().map(|(m, t)| htma_s(align, m, t)).collect::<Result<_>>()?;
    let mut report = Report::new();
    report.set("htma_s", scores.iter().sum::<f64>() / scores.len() as f64);
    report.set("samples", scores.len() as f64);
    report.note("suite", "editing");
    report.note("feature_extractor", FEATURE_EXTRACTOR);
    Ok(report)
}
