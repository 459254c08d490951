use std::collections::BTreeMap;

use rand::Rng as _;
use rand_distr::StandardNormal;

use super::losses::{infonce_var, kl_regularizers_var, similarity_var, smooth_l1_var, GaussianVar};
use super::model::AlignmentModel;
use crate::annotation::{cosine, HierarchicalAnnotation, TextEmbedder};
use crate::config::{AlignConfig, PipelineConfig};
use crate::error::{Error, Result};
use crate::nn::{Adam, Ctx, Graph, Tensor, TrainingLog, Var};
use crate::representation::{FeatureNormalizer, MotionSequence};
use crate::rng::{substream, Rng};

/// Relative weights of the four alignment losses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlignmentLossWeights {
    pub nce: f64,
    pub kl: f64,
    pub embed: f64,
    pub recon: f64,
}

impl From<&AlignConfig> for AlignmentLossWeights {
    fn from(c: &AlignConfig) -> Self {
        Self { nce: c.lambda_nce, kl: c.lambda_kl, embed: c.lambda_e, recon: c.lambda_r }
    }
}

/// Individual loss terms of one batch, as graph nodes.
pub struct AlignmentLosses {
    pub nce: Option<Var>,
    pub kl: Var,
    pub embed: Var,
    pub recon: Var,
}

impl AlignmentLosses {
    pub fn total(&self, g: &Graph, w: AlignmentLossWeights) -> Var {
        let mut t = g.add(g.scale(self.kl, w.kl), g.add(g.scale(self.embed, w.embed), g.scale(self.recon, w.recon)));
        if let Some(nce) = self.nce {
            t = g.add(t, g.scale(nce, w.nce));
        }
        t
    }
}

fn gaussian_noise(rows: usize, cols: usize, rng: &mut Rng) -> Tensor {
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect())
}

/// Builds the loss terms for one batch. `captions[i]` picks which global
/// caption of sample `i` is used; `filter` masks InfoNCE negatives.
pub fn batch_losses(
    cx: &Ctx,
    model: &AlignmentModel,
    batch: &[(&MotionSequence, &HierarchicalAnnotation, usize)],
    filter: Option<&[Vec<bool>]>,
    temperature: f64,
    rng: &mut Rng,
) -> Result<AlignmentLosses> {
    let g = cx.g;
    let d = model.latent_dim();
    let mut text = vec![Vec::new(), Vec::new(), Vec::new()];
    let mut motion = Vec::new();
    let mut recon = Vec::new();
    for &(m, a, caption) in batch {
        let tf = model.text_forward(cx, a, caption)?;
        let md = model.motion_forward(cx, m.features());
        let target = g.leaf(model.normalizer.normalize(m.features()));
        let frames = m.frames();
        let sample = |dist: GaussianVar, rng: &mut Rng| g.add(dist.mu, g.mul(dist.sigma, g.leaf(gaussian_noise(1, d, rng))));
        let from_motion = model.decode_var(cx, sample(md, rng), frames);
        let from_text = model.decode_var(cx, sample(tf.dists[2], rng), frames);
        recon.push(g.scale(g.add(smooth_l1_var(g, from_motion, target), smooth_l1_var(g, from_text, target)), 0.5));
        for (l, dist) in tf.dists.into_iter().enumerate() {
            text[l].push(dist);
        }
        motion.push(md);
    }
    let stack = |ds: &[GaussianVar]| GaussianVar {
        mu: g.concat_rows(&ds.iter().map(|d| d.mu).collect::<Vec<_>>()),
        sigma: g.concat_rows(&ds.iter().map(|d| d.sigma).collect::<Vec<_>>()),
    };
    let zm = stack(&motion);
    let levels: Vec<GaussianVar> = text.iter().map(|t| stack(t)).collect();
    let nce = if batch.len() >= 2 {
        let mut acc = None;
        for zt in &levels {
            let l = infonce_var(g, similarity_var(g, zt.mu, zm.mu), temperature, filter)?;
            acc = Some(acc.map_or(l, |a| g.add(a, l)));
        }
        acc
    } else {
        None
    };
    let kl = levels.iter().map(|&zt| kl_regularizers_var(g, zt, zm)).reduce(|a, b| g.add(a, b)).expect("three levels");
    let embed = levels.iter().map(|zt| smooth_l1_var(g, zt.mu, zm.mu)).reduce(|a, b| g.add(a, b)).expect("three levels");
    let recon = recon.into_iter().reduce(|a, b| g.add(a, b)).expect("nonempty batch");
    Ok(AlignmentLosses {
        nce,
        kl,
        embed: g.scale(embed, 1.0 / 3.0),
        recon: g.scale(recon, 1.0 / batch.len() as f64),
    })
}

/// `filter[i][j]` is true when the captions of `i` and `j` are at least
/// `threshold` similar under `embedder`.
pub fn negative_filter(captions: &[&str], embedder: &dyn TextEmbedder, threshold: f64) -> Vec<Vec<bool>> {
    let e: Vec<Vec<f64>> = captions.iter().map(|c| embedder.embed(c)).collect();
    e.iter().map(|a| e.iter().map(|b| cosine(a, b) >= threshold).collect()).collect()
}

/// Trains the text and motion encoders on `corpus`.
///
/// Each epoch shuffles the corpus with a seeded permutation and draws one
/// caption per sample. Parameters are rounded to `f32` at the end so the
/// returned model equals its reloaded checkpoint.
pub fn train_alignment(
    corpus: &[(MotionSequence, HierarchicalAnnotation)],
    config: &PipelineConfig,
    embedder: &dyn TextEmbedder,
) -> Result<(AlignmentModel, TrainingLog)> {
    if corpus.is_empty() {
        return Err(Error::InsufficientSamples("alignment training needs at least one pair".into()));
    }
    config.validate()?;
    let cfg = &config.align;
    let normalizer = FeatureNormalizer::fit(corpus.iter().map(|(m, _)| m.features()))?;
    let mut model = AlignmentModel::new(cfg, normalizer, config.seed);
    let weights = AlignmentLossWeights::from(cfg);
    let mut opt = Adam::new(cfg.lr);
    let mut rng = substream(config.seed, "align.train");
    let mut log = TrainingLog::default();
    for epoch in 0..cfg.epochs {
        let order = crate::rng::seeded_permutation(corpus.len(), rng.random());
        let mut sums: BTreeMap<String, f64> = BTreeMap::new();
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let batch: Vec<_> = chunk
                .iter()
                .map(|&i| {
                    let (m, a) = &corpus[i];
                    (m, a, rng.random_range(0..a.global_texts.len()))
                })
                .collect();
            let captions: Vec<&str> = batch.iter().map(|(_, a, c)| a.global_texts[*c].as_str()).collect();
            let filter = negative_filter(&captions, embedder, cfg.negative_filter);
            let g = Graph::new();
            let cx = Ctx::new(&g, &model.store);
            let losses = batch_losses(&cx, &model, &batch, Some(&filter), cfg.temperature, &mut rng)?;
            let loss = losses.total(&g, weights);
            let value = g.item(loss);
            if !value.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            for (name, v) in [("nce", losses.nce), ("kl", Some(losses.kl)), ("embed", Some(losses.embed)), ("rec", Some(losses.recon))] {
                *sums.entry(name.to_string()).or_default() += v.map_or(0.0, |v| g.item(v));
            }
            let grads = g.backward(loss);
            let pg = cx.param_grads(&grads);
            drop(cx);
            opt.step(&mut model.store, &pg);
            total += value;
            batches += 1;
        }
        let n = batches as f64;
        log.push(epoch, total / n, sums.into_iter().map(|(k, v)| (k, v / n)).collect());
    }
    if !model.store.all_finite() {
        return Err(Error::TrainingDiverged { epoch: cfg.epochs });
    }
    model.store.snap_to_f32();
    Ok((model, log))
}
