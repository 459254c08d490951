use std::collections::BTreeMap;

use rand::Rng as _;

use crate::alignment::{AlignmentModel, TextLevel};
use crate::annotation::HierarchicalAnnotation;
use crate::config::GenConfig;
use crate::error::{Error, Result};
use crate::nn::{argmax, Tensor};
use crate::representation::{GroupPair, KinematicGroup, MotionSequence};
use crate::rng::{substream, Rng};

use super::generator::{guided_logits, ConditionTokens, GeneratorModel};
use super::reasoner::ReasonerClient;
use super::rqvae::{MotionTokenGrid, RqVae};
use super::schedule::mask_schedule;

/// Base-layer logits for a token sequence; implemented by the plain generator
/// and by the generator with a control branch attached. Residual layers always
/// come from [`LogitSource::model`].
pub trait LogitSource {
    fn base_logits(&self, cond: Option<&ConditionTokens>, tokens: &[usize]) -> Tensor;

    fn model(&self) -> &GeneratorModel;
}

impl LogitSource for GeneratorModel {
    fn base_logits(&self, cond: Option<&ConditionTokens>, tokens: &[usize]) -> Tensor {
        GeneratorModel::base_logits(self, cond, tokens)
    }

    fn model(&self) -> &GeneratorModel {
        self
    }
}

/// Sampling knobs, normally taken from the `gen` config section.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingOptions {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    /// Fraction of editable tokens remasked at the start of stages 2 and 3.
    pub rho: f64,
    pub guidance: f64,
    pub temperature: f64,
    pub topk_filter: f64,
    /// Finest conditioning level used; coarser levels skip later stages.
    pub level: TextLevel,
}

impl SamplingOptions {
    pub fn from_config(c: &GenConfig) -> Result<Self> {
        Ok(Self {
            n1: c.n1,
            n2: c.n2,
            n3: c.n3,
            rho: c.rho,
            guidance: c.guidance,
            temperature: c.temperature,
            topk_filter: c.topk_filter,
            level: c.level.parse()?,
        })
    }
}

/// Trained models needed for text-to-motion.
#[derive(Clone, Copy)]
pub struct GenerationModels<'a> {
    pub align: &'a AlignmentModel,
    pub rqvae: &'a RqVae,
    pub generator: &'a dyn LogitSource,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationOutput {
    pub grid: MotionTokenGrid,
    pub motion: MotionSequence,
    /// Level used, seed, fallback flag and the texts the reasoner produced.
    pub metadata: BTreeMap<String, String>,
}

/// Guided logits: `uncond + s · (cond − uncond)`.
fn cfg_logits(src: &dyn LogitSource, cond: &ConditionTokens, tokens: &[usize], scale: f64) -> Tensor {
    let uncond = src.base_logits(None, tokens);
    if scale == 0.0 {
        return uncond;
    }
    guided_logits(&src.base_logits(Some(cond), tokens), &uncond, scale)
}

/// Draws a code from the temperature softmax over the top-k logits (ties
/// broken toward lower indices); returns the code and its probability.
pub fn sample_code(logits: &[f64], temperature: f64, topk_filter: f64, rng: &mut Rng) -> (usize, f64) {
    let k = logits.len();
    let keep = (((1.0 - topk_filter) * k as f64).ceil() as usize).clamp(1, k);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]).then(a.cmp(&b)));
    order.truncate(keep);
    let top = logits[order[0]];
    let weights: Vec<f64> = order.iter().map(|&i| ((logits[i] - top) / temperature).exp()).collect();
    let z: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * z;
    let mut acc = 0.0;
    for (&i, &w) in order.iter().zip(&weights) {
        acc += w;
        if u < acc {
            return (i, w / z);
        }
    }
    let last = *order.last().expect("at least one code");
    (last, weights[keep - 1] / z)
}

/// Mask-predict over `masked` positions for `iterations` steps: every step
/// fills all masked positions, then remasks the lowest-confidence newly
/// filled ones following the cosine schedule.
#[allow(clippy::too_many_arguments)]
fn mask_predict(
    src: &dyn LogitSource,
    cond: &ConditionTokens,
    tokens: &mut [usize],
    confidence: &mut [f64],
    masked: Vec<usize>,
    iterations: usize,
    opts: &SamplingOptions,
    mask_token: usize,
    rng: &mut Rng,
) {
    let total = masked.len();
    if total == 0 || iterations == 0 {
        return;
    }
    let mut current = masked;
    for &p in &current {
        tokens[p] = mask_token;
    }
    for i in 0..iterations {
        let logits = cfg_logits(src, cond, tokens, opts.guidance);
        for &p in &current {
            let (code, prob) = sample_code(logits.row(p), opts.temperature, opts.topk_filter, rng);
            tokens[p] = code;
            confidence[p] = prob;
        }
        let keep = if i + 1 == iterations {
            0
        } else {
            let frac = mask_schedule((i + 1) as f64 / iterations as f64).expect("in range");
            ((frac * total as f64).floor() as usize).min(current.len())
        };
        current.sort_by(|&a, &b| confidence[a].total_cmp(&confidence[b]).then(a.cmp(&b)));
        current.truncate(keep);
        for &p in &current {
            tokens[p] = mask_token;
        }
    }
}

/// `round(ρ · n)` lowest-confidence editable positions.
fn lowest_confidence(confidence: &[f64], editable: &[usize], rho: f64) -> Vec<usize> {
    let n = (rho * editable.len() as f64).round() as usize;
    let mut order = editable.to_vec();
    order.sort_by(|&a, &b| confidence[a].total_cmp(&confidence[b]).then(a.cmp(&b)));
    order.truncate(n);
    order
}

/// Coarse-to-fine infill of the `editable` columns of `source`.
///
/// `stages[s]` conditions stage `s + 1`; missing entries skip that stage.
/// Columns outside `editable` keep every layer of `source`.
pub fn infill_tokens(
    generator: &dyn LogitSource,
    stages: &[ConditionTokens],
    source: &MotionTokenGrid,
    editable: &[bool],
    opts: &SamplingOptions,
    rng: &mut Rng,
) -> Result<MotionTokenGrid> {
    let model = generator.model();
    if editable.len() != source.len() {
        return Err(Error::InvalidArgument(format!("mask has {} columns, grid has {}", editable.len(), source.len())));
    }
    let first = stages.first().ok_or_else(|| Error::InvalidArgument("no conditioning stages".into()))?;
    let positions: Vec<usize> = (0..source.len()).filter(|&p| editable[p]).collect();
    let mut out = source.clone();
    if positions.is_empty() {
        return Ok(out);
    }
    let mask_token = model.masked.mask_token();
    let mut tokens = source.base();
    let mut confidence = vec![f64::INFINITY; tokens.len()];
    mask_predict(generator, first, &mut tokens, &mut confidence, positions.clone(), opts.n1, opts, mask_token, rng);
    for (cond, n) in stages.iter().skip(1).zip([opts.n2, opts.n3]) {
        if opts.rho == 0.0 {
            break;
        }
        let remask = lowest_confidence(&confidence, &positions, opts.rho);
        mask_predict(generator, cond, &mut tokens, &mut confidence, remask, n, opts, mask_token, rng);
    }
    for &p in &positions {
        out.tokens[p] = vec![0; model.layers()];
        out.tokens[p][0] = tokens[p];
    }
    let last = stages.last().expect("nonempty");
    for q in 1..model.layers() {
        let cond = model.residual_logits(Some(last), &out.tokens, q)?;
        let logits = if opts.guidance == 0.0 {
            model.residual_logits(None, &out.tokens, q)?
        } else {
            guided_logits(&cond, &model.residual_logits(None, &out.tokens, q)?, opts.guidance)
        };
        for &p in &positions {
            out.tokens[p][q] = argmax(logits.row(p));
        }
    }
    Ok(out)
}

/// Conditioning for each stage up to `level`.
pub fn stage_conditions(align: &AlignmentModel, annotation: &HierarchicalAnnotation, level: TextLevel) -> Result<Vec<ConditionTokens>> {
    let full = ConditionTokens::from_annotation(align, annotation, level)?;
    TextLevel::ALL.iter().filter(|&&l| l <= level).map(|&l| full.at_level(l)).collect()
}

fn generation_rng(seed: u64) -> Rng {
    substream(seed, "generate")
}

fn annotation_metadata(annotation: &HierarchicalAnnotation, meta: &mut BTreeMap<String, String>) {
    for g in KinematicGroup::ALL {
        meta.insert(format!("joint.{g}"), annotation.joint_texts[&g].clone());
    }
    for p in GroupPair::all() {
        meta.insert(format!("interaction.{p}"), annotation.interaction_texts[&p].clone());
    }
}

/// Generates `frames` frames conditioned on a full annotation.
pub fn generate_from_annotation(
    models: GenerationModels<'_>,
    annotation: &HierarchicalAnnotation,
    frames: usize,
    opts: &SamplingOptions,
    seed: u64,
) -> Result<GenerationOutput> {
    let grid = blank_grid(models, frames)?;
    let stages = stage_conditions(models.align, annotation, opts.level)?;
    let grid = infill_tokens(models.generator, &stages, &grid, &vec![true; grid.len()], opts, &mut generation_rng(seed))?;
    let motion = models.rqvae.decode(&grid)?;
    let mut metadata = BTreeMap::from([
        ("text".to_string(), annotation.caption().to_string()),
        ("level".to_string(), opts.level.short().to_string()),
        ("seed".to_string(), seed.to_string()),
        ("frames".to_string(), frames.to_string()),
        ("fallback".to_string(), "false".to_string()),
    ]);
    annotation_metadata(annotation, &mut metadata);
    Ok(GenerationOutput { grid, motion, metadata })
}

fn blank_grid(models: GenerationModels<'_>, frames: usize) -> Result<MotionTokenGrid> {
    if frames == 0 {
        return Err(Error::InvalidArgument("cannot generate zero frames".into()));
    }
    let r = models.rqvae.config.downsample;
    let layers = models.generator.model().layers();
    Ok(MotionTokenGrid { tokens: vec![vec![0; layers]; frames.div_ceil(r)], downsample: r, frames })
}

/// Text-to-motion: the reasoner expands `text` into group and pair texts and
/// sampling runs coarse to fine. If the reasoner fails, only the caption
/// conditions generation and `metadata["fallback"]` is `"true"`.
pub fn generate(
    models: GenerationModels<'_>,
    reasoner: &dyn ReasonerClient,
    text: &str,
    frames: usize,
    opts: &SamplingOptions,
    seed: u64,
) -> Result<GenerationOutput> {
    match reasoner.expand(text) {
        Ok(annotation) => generate_from_annotation(models, &annotation, frames, opts, seed),
        Err(e) => {
            if text.trim().is_empty() {
                return Err(Error::InvalidArgument("empty text".into()));
            }
            let grid = blank_grid(models, frames)?;
            let stages = vec![ConditionTokens::from_caption(models.align, text)?];
            let grid = infill_tokens(models.generator, &stages, &grid, &vec![true; grid.len()], opts, &mut generation_rng(seed))?;
            let motion = models.rqvae.decode(&grid)?;
            let metadata = BTreeMap::from([
                ("text".to_string(), text.to_string()),
                ("level".to_string(), TextLevel::Global.short().to_string()),
                ("seed".to_string(), seed.to_string()),
                ("frames".to_string(), frames.to_string()),
                ("fallback".to_string(), "true".to_string()),
                ("fallback.reason".to_string(), e.to_string()),
            ]);
            Ok(GenerationOutput { grid, motion, metadata })
        }
    }
}

/// Re-predicts the token columns marked in `column_mask`; all other columns
/// are returned unchanged. An all-true mask is [`generate_from_annotation`]
/// at the source length.
pub fn edit_infill(
    models: GenerationModels<'_>,
    source: &MotionTokenGrid,
    column_mask: &[bool],
    annotation: &HierarchicalAnnotation,
    opts: &SamplingOptions,
    seed: u64,
) -> Result<MotionTokenGrid> {
    if column_mask.len() != source.len() {
        return Err(Error::InvalidArgument(format!("mask has {} columns, grid has {}", column_mask.len(), source.len())));
    }
    let model = models.generator.model();
    source.validate(model.codes(), model.layers())?;
    if !column_mask.iter().any(|&m| m) {
        return Ok(source.clone());
    }
    let stages = stage_conditions(models.align, annotation, opts.level)?;
    infill_tokens(models.generator, &stages, source, column_mask, opts, &mut generation_rng(seed))
}

/// Frame ranges `"a:b,c:d"` (half-open, in frames) as a per-frame mask.
pub fn parse_frame_ranges(spec: &str, frames: usize) -> Result<Vec<bool>> {
    let mut mask = vec![false; frames];
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (a, b) = part.split_once(':').ok_or_else(|| Error::InvalidArgument(format!("range {part:?} is not a:b")))?;
        let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| Error::InvalidArgument(format!("bad frame {s:?} in {part:?}")));
        let (a, b) = (parse(a)?, parse(b)?);
        if a >= b || b > frames {
            return Err(Error::InvalidArgument(format!("range {a}:{b} outside 0:{frames}")));
        }
        mask[a..b].iter_mut().for_each(|m| *m = true);
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn sample_code_respects_topk() {
        let logits = [0.0, 5.0, 4.0, -1.0, 3.0, 2.0, 1.0, 0.5, 0.2, 0.1];
        let mut rng = Rng::seed_from_u64(0);
        for _ in 0..200 {
            let (c, p) = sample_code(&logits, 1.0, 0.8, &mut rng);
            assert!([1, 2].contains(&c));
            assert!(p > 0.0 && p <= 1.0);
        }
        // A near-zero temperature is greedy.
        assert_eq!(sample_code(&logits, 1e-6, 0.0, &mut rng).0, 1);
    }

    #[test]
    fn frame_ranges() {
        let m = parse_frame_ranges("2:4, 6:7", 8).unwrap();
        assert_eq!(m, vec![false, false, true, true, false, false, true, false]);
        assert!(parse_frame_ranges("4:2", 8).is_err());
        assert!(parse_frame_ranges("0:9", 8).is_err());
        assert!(parse_frame_ranges("x", 8).is_err());
    }
}
