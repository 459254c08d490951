use std::fmt;
use std::str::FromStr;

use crate::annotation::{tokenize, HierarchicalAnnotation};
use crate::checkpoint::Checkpoint;
use crate::config::{AlignConfig, PipelineConfig, Section};
use crate::error::{Error, Result};
use crate::nn::{sinusoidal_positions, Ctx, Graph, LayerNorm, Linear, ParamId, ParamStore, Tensor};
use crate::nn::{Embedding, TransformerBlock, Transformer, Var};
use crate::representation::{FeatureNormalizer, GroupPair, KinematicGroup, MotionSequence, FEATURE_DIM};
use crate::rng::{substream, Rng};

use super::losses::{cross_attention_fuse_var, GaussianVar};

pub const CHECKPOINT_TAG: &str = "align";

/// Added to every softplus output so standard deviations stay strictly positive.
const SIGMA_FLOOR: f64 = 1e-6;

/// Granularity of text conditioning.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TextLevel {
    Global,
    Joint,
    Interaction,
}

impl TextLevel {
    pub const ALL: [TextLevel; 3] = [TextLevel::Global, TextLevel::Joint, TextLevel::Interaction];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Short form used on the command line: `g`, `gj`, `gji`.
    pub fn short(self) -> &'static str {
        match self {
            TextLevel::Global => "g",
            TextLevel::Joint => "gj",
            TextLevel::Interaction => "gji",
        }
    }
}

impl fmt::Display for TextLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TextLevel::Global => "global",
            TextLevel::Joint => "joint",
            TextLevel::Interaction => "interaction",
        })
    }
}

impl FromStr for TextLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "global" | "g" => Ok(TextLevel::Global),
            "joint" | "gj" => Ok(TextLevel::Joint),
            "interaction" | "inter" | "gji" => Ok(TextLevel::Interaction),
            other => Err(Error::InvalidLevel(other.to_string())),
        }
    }
}

/// Per-level latents after progressive fusion.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentTriple {
    pub z_global: Vec<f64>,
    pub z_joint: Vec<f64>,
    pub z_inter: Vec<f64>,
}

impl LatentTriple {
    pub fn level(&self, level: TextLevel) -> &[f64] {
        match level {
            TextLevel::Global => &self.z_global,
            TextLevel::Joint => &self.z_joint,
            TextLevel::Interaction => &self.z_inter,
        }
    }
}

/// Weights on the standard deviations folded into the finer levels.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FusionGains {
    pub joint: f64,
    pub inter: f64,
}

/// `z_global = μ_c`, `z_joint = μ_c + μ_j + γ_j σ_j`, `z_inter = z_joint + μ_i + γ_i σ_i`.
pub fn progressive_fuse(
    coarse: (&[f64], &[f64]),
    joint: (&[f64], &[f64]),
    inter: (&[f64], &[f64]),
    gains: FusionGains,
) -> Result<LatentTriple> {
    let d = coarse.0.len();
    for v in [coarse.1, joint.0, joint.1, inter.0, inter.1] {
        if v.len() != d {
            return Err(Error::Dim(format!("fusion inputs of length {} and {d}", v.len())));
        }
    }
    let z_global = coarse.0.to_vec();
    let z_joint: Vec<f64> = (0..d).map(|k| z_global[k] + joint.0[k] + gains.joint * joint.1[k]).collect();
    let z_inter = (0..d).map(|k| z_joint[k] + inter.0[k] + gains.inter * inter.1[k]).collect();
    Ok(LatentTriple { z_global, z_joint, z_inter })
}

/// Turns texts into token feature matrices.
pub trait TextBackbone {
    fn dim(&self) -> usize;
    /// One `tokens × dim` matrix per text, each with at least one row.
    fn encode(&self, cx: &Ctx, texts: &[&str]) -> Vec<Var>;
}

/// Hashed word embeddings with sinusoidal positions and one transformer
/// layer; texts encoded together never attend to each other.
#[derive(Clone, Debug)]
pub struct HashedWordBackbone {
    embed: Embedding,
    block: TransformerBlock,
    norm: LayerNorm,
    buckets: usize,
    max_words: usize,
}

impl HashedWordBackbone {
    pub fn new(store: &mut ParamStore, name: &str, cfg: &AlignConfig, rng: &mut Rng) -> Self {
        let d = cfg.latent_dim;
        Self {
            embed: Embedding::new(store, &format!("{name}.embed"), cfg.vocab_buckets, d, rng),
            block: TransformerBlock::new(store, &format!("{name}.block"), d, cfg.heads, rng),
            norm: LayerNorm::new(store, &format!("{name}.ln"), d),
            buckets: cfg.vocab_buckets,
            max_words: cfg.max_words,
        }
    }

    /// Bucket ids; bucket 0 stands for an empty text.
    pub fn token_ids(&self, text: &str) -> Vec<usize> {
        let ids: Vec<usize> = tokenize(text)
            .iter()
            .take(self.max_words)
            .map(|w| 1 + (crate::annotation::fnv1a(w.as_bytes()) % (self.buckets as u64 - 1)) as usize)
            .collect();
        if ids.is_empty() {
            vec![0]
        } else {
            ids
        }
    }
}

impl TextBackbone for HashedWordBackbone {
    fn dim(&self) -> usize {
        self.embed.dim
    }

    fn encode(&self, cx: &Ctx, texts: &[&str]) -> Vec<Var> {
        let g = cx.g;
        let per_text: Vec<Vec<usize>> = texts.iter().map(|t| self.token_ids(t)).collect();
        let longest = per_text.iter().map(Vec::len).max().unwrap_or(1);
        let pos = g.leaf(sinusoidal_positions(longest, self.dim()));
        // Each text attends only to itself; running the block per text is
        // the block-diagonal masked attention without the masked work.
        per_text
            .iter()
            .map(|ids| {
                let x = g.add(self.embed.forward(cx, ids), g.slice_rows(pos, 0, ids.len()));
                self.norm.forward(cx, self.block.forward(cx, x, None))
            })
            .collect()
    }
}

/// Transformer over `[μ token; σ token; inputs]`.
#[derive(Clone, Debug)]
pub struct LevelEncoder {
    dist_tokens: ParamId,
    transformer: Transformer,
}

pub struct LevelOutput {
    pub dist: GaussianVar,
    /// Encoded input tokens, without the two distribution tokens.
    pub tokens: Var,
}

impl LevelEncoder {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, depth: usize, heads: usize, rng: &mut Rng) -> Self {
        Self {
            dist_tokens: store.normal(format!("{name}.dist_tokens"), 2, dim, 0.3, rng),
            transformer: Transformer::new(store, name, dim, depth, heads, rng),
        }
    }

    pub fn forward(&self, cx: &Ctx, inputs: Var) -> LevelOutput {
        let g = cx.g;
        let n = g.shape(inputs).0;
        let y = self.transformer.forward(cx, g.concat_rows(&[cx.p(self.dist_tokens), inputs]), None);
        let mu = g.slice_rows(y, 0, 1);
        let sigma = g.offset(g.softplus(g.slice_rows(y, 1, 1)), SIGMA_FLOOR);
        LevelOutput { dist: GaussianVar { mu, sigma }, tokens: g.slice_rows(y, 2, n) }
    }
}

/// Graph outputs of the three text levels.
pub struct TextForward {
    /// Distributions per level; means are the fused latents.
    pub dists: [GaussianVar; 3],
    /// Encoded tokens per level: caption tokens, 6 group rows, 15 pair rows.
    pub tokens: [Var; 3],
}

/// Text encoders, motion encoder and decoder sharing one latent space.
#[derive(Clone, Debug)]
pub struct AlignmentModel {
    pub config: AlignConfig,
    pub store: ParamStore,
    pub normalizer: FeatureNormalizer,
    backbone: HashedWordBackbone,
    group_embed: ParamId,
    pair_embed: ParamId,
    fuse_joint: Linear,
    fuse_inter: Linear,
    enc_global: LevelEncoder,
    enc_joint: LevelEncoder,
    enc_inter: LevelEncoder,
    gains: ParamId,
    motion_in: Linear,
    motion_enc: LevelEncoder,
    dec_hidden: Linear,
    dec_mid: Linear,
    dec_out: Linear,
}

impl AlignmentModel {
    pub fn new(config: &AlignConfig, normalizer: FeatureNormalizer, seed: u64) -> Self {
        let mut rng = substream(seed, "align.init");
        let rng = &mut rng;
        let mut store = ParamStore::new();
        let s = &mut store;
        let d = config.latent_dim;
        let (depth, heads) = (config.depth, config.heads);
        let backbone = HashedWordBackbone::new(s, "text.backbone", config, rng);
        let group_embed = s.normal("text.group_embed", 6, d, 0.3, rng);
        let pair_embed = s.normal("text.pair_embed", 15, d, 0.3, rng);
        let fuse_joint = Linear::new(s, "text.fuse_joint", d, d, rng);
        let fuse_inter = Linear::new(s, "text.fuse_inter", d, d, rng);
        let enc_global = LevelEncoder::new(s, "text.global", d, depth, heads, rng);
        let enc_joint = LevelEncoder::new(s, "text.joint", d, depth, heads, rng);
        let enc_inter = LevelEncoder::new(s, "text.inter", d, depth, heads, rng);
        let gains = s.zeros("text.fusion_gains", 1, 2);
        let motion_in = Linear::new(s, "motion.input", FEATURE_DIM, d, rng);
        let motion_enc = LevelEncoder::new(s, "motion.encoder", d, depth, heads, rng);
        let dec_hidden = Linear::new(s, "motion.decoder.hidden", 2 * d, 2 * d, rng);
        let dec_mid = Linear::new(s, "motion.decoder.mid", 2 * d, 2 * d, rng);
        let dec_out = Linear::new(s, "motion.decoder.out", 2 * d, FEATURE_DIM, rng);
        Self {
            config: config.clone(),
            store,
            normalizer,
            backbone,
            group_embed,
            pair_embed,
            fuse_joint,
            fuse_inter,
            enc_global,
            enc_joint,
            enc_inter,
            gains,
            motion_in,
            motion_enc,
            dec_hidden,
            dec_mid,
            dec_out,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    pub fn fusion_gains(&self) -> FusionGains {
        let g = self.store.get(self.gains);
        FusionGains { joint: g.get(0, 0), inter: g.get(0, 1) }
    }

    /// All three levels for `annotation` with caption `caption`.
    pub fn text_forward(&self, cx: &Ctx, annotation: &HierarchicalAnnotation, caption: usize) -> Result<TextForward> {
        let g = cx.g;
        let d = self.latent_dim();
        let caption = annotation
            .global_texts
            .get(caption)
            .ok_or_else(|| Error::InvalidArgument(format!("caption index {caption} out of range")))?;
        let mut texts: Vec<&str> = vec![caption.as_str()];
        for grp in KinematicGroup::ALL {
            texts.push(&annotation.joint_texts[&grp]);
        }
        for pair in GroupPair::all() {
            texts.push(&annotation.interaction_texts[&pair]);
        }
        let tokens = self.backbone.encode(cx, &texts);
        let pooled = |range: std::ops::Range<usize>| {
            let rows: Vec<Var> = tokens[range].iter().map(|&t| g.mean_rows(t)).collect();
            g.concat_rows(&rows)
        };
        let gains = cx.p(self.gains);

        let global = self.enc_global.forward(cx, tokens[0]);
        let z_c = global.tokens;

        let joint_in = g.add(pooled(1..7), cx.p(self.group_embed));
        let joint_in = g.add(joint_in, cross_attention_fuse_var(g, self.fuse_joint.forward(cx, joint_in), z_c, d)?);
        let joint = self.enc_joint.forward(cx, joint_in);

        let inter_in = g.add(pooled(7..22), cx.p(self.pair_embed));
        let context = g.concat_rows(&[z_c, joint.tokens]);
        let inter_in = g.add(inter_in, cross_attention_fuse_var(g, self.fuse_inter.forward(cx, inter_in), context, d)?);
        let inter = self.enc_inter.forward(cx, inter_in);

        let z_global = global.dist.mu;
        let fold = |mu: Var, sigma: Var, k: usize| g.add(mu, g.mul_scalar_var(sigma, g.slice_cols(gains, k, 1)));
        let z_joint = g.add(z_global, fold(joint.dist.mu, joint.dist.sigma, 0));
        let z_inter = g.add(z_joint, fold(inter.dist.mu, inter.dist.sigma, 1));
        Ok(TextForward {
            dists: [
                global.dist,
                GaussianVar { mu: z_joint, sigma: joint.dist.sigma },
                GaussianVar { mu: z_inter, sigma: inter.dist.sigma },
            ],
            tokens: [z_c, joint.tokens, inter.tokens],
        })
    }

    /// Motion distribution from raw (unnormalized) features.
    pub fn motion_forward(&self, cx: &Ctx, features: &Tensor) -> GaussianVar {
        let g = cx.g;
        let x = self.normalizer.normalize(features);
        let pos = sinusoidal_positions(x.rows(), self.latent_dim());
        let h = g.add(self.motion_in.forward(cx, g.leaf(x)), g.leaf(pos));
        self.motion_enc.forward(cx, h).dist
    }

    /// Normalized features decoded from a `1×d` latent.
    pub fn decode_var(&self, cx: &Ctx, z: Var, frames: usize) -> Var {
        let g = cx.g;
        let rep = g.gather_rows(z, &vec![0; frames]);
        let x = g.concat_cols(&[rep, g.leaf(sinusoidal_positions(frames, self.latent_dim()))]);
        let h = g.gelu(self.dec_hidden.forward(cx, x));
        let h = g.gelu(self.dec_mid.forward(cx, h));
        self.dec_out.forward(cx, h)
    }

    /// Fused text latent at `level`, using the first caption.
    pub fn embed_text(&self, annotation: &HierarchicalAnnotation, level: TextLevel) -> Result<Vec<f64>> {
        let g = Graph::new();
        let cx = Ctx::new(&g, &self.store);
        let out = self.text_forward(&cx, annotation, 0)?;
        Ok(g.tensor(out.dists[level.index()].mu).data().to_vec())
    }

    /// Latent of a caption alone; identical to the global level of any
    /// annotation whose first caption is `caption`.
    pub fn embed_caption(&self, caption: &str) -> Result<Vec<f64>> {
        let g = Graph::new();
        let cx = Ctx::new(&g, &self.store);
        let tokens = self.backbone.encode(&cx, &[caption]);
        Ok(g.tensor(self.enc_global.forward(&cx, tokens[0]).dist.mu).data().to_vec())
    }

    pub fn embed_motion(&self, motion: &MotionSequence) -> Vec<f64> {
        let g = Graph::new();
        let cx = Ctx::new(&g, &self.store);
        g.tensor(self.motion_forward(&cx, motion.features()).mu).data().to_vec()
    }

    /// Latent triple for `annotation`.
    pub fn latents(&self, annotation: &HierarchicalAnnotation) -> Result<LatentTriple> {
        let g = Graph::new();
        let cx = Ctx::new(&g, &self.store);
        let out = self.text_forward(&cx, annotation, 0)?;
        let v = |k: usize| g.tensor(out.dists[k].mu).data().to_vec();
        Ok(LatentTriple { z_global: v(0), z_joint: v(1), z_inter: v(2) })
    }

    /// Encoded text tokens available at `level`: caption tokens, then group
    /// rows, then pair rows.
    pub fn condition_tokens(&self, annotation: &HierarchicalAnnotation, level: TextLevel) -> Result<Tensor> {
        self.condition_tokens_for(annotation, 0, level)
    }

    /// [`Self::condition_tokens`] using caption `caption` of the annotation.
    pub fn condition_tokens_for(&self, annotation: &HierarchicalAnnotation, caption: usize, level: TextLevel) -> Result<Tensor> {
        let g = Graph::new();
        let cx = Ctx::new(&g, &self.store);
        let out = self.text_forward(&cx, annotation, caption)?;
        let parts: Vec<Var> = out.tokens[..=level.index()].to_vec();
        Ok(g.tensor(g.concat_rows(&parts)))
    }

    /// Caption-only condition tokens.
    pub fn caption_tokens(&self, caption: &str) -> Result<Tensor> {
        let g = Graph::new();
        let cx = Ctx::new(&g, &self.store);
        let tokens = self.backbone.encode(&cx, &[caption]);
        Ok(g.tensor(self.enc_global.forward(&cx, tokens[0]).tokens))
    }

    /// Reconstructs a motion of `frames` frames from a latent.
    pub fn decode(&self, z: &[f64], frames: usize) -> Result<MotionSequence> {
        if z.len() != self.latent_dim() {
            return Err(Error::Dim(format!("latent of length {}, expected {}", z.len(), self.latent_dim())));
        }
        let g = Graph::new();
        let cx = Ctx::new(&g, &self.store);
        let out = self.decode_var(&cx, g.leaf(Tensor::row_vector(z.to_vec())), frames);
        MotionSequence::from_network_output(self.normalizer.denormalize(&g.tensor(out)))
    }

    pub fn to_checkpoint(&self, config: &PipelineConfig) -> Checkpoint {
        let mut ck = Checkpoint::new(CHECKPOINT_TAG, config, Section::Align);
        ck.insert_store(&self.store);
        ck.insert("normalizer", self.normalizer.to_tensor());
        ck
    }

    /// Rebuilds the model from the configuration embedded in `ck`.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.tag != CHECKPOINT_TAG {
            return Err(Error::format("checkpoint", format!("expected an {CHECKPOINT_TAG} checkpoint, found {}", ck.tag)));
        }
        let config = ck.config()?;
        let normalizer = FeatureNormalizer::from_tensor(ck.get("normalizer")?)?;
        let mut model = Self::new(&config.align, normalizer, config.seed);
        ck.load_store(&mut model.store)?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    pub(crate) fn annotation(caption: &str, joint: &str) -> HierarchicalAnnotation {
        HierarchicalAnnotation::new(
            vec![caption.to_string()],
            KinematicGroup::ALL.iter().map(|&g| (g, format!("{} {joint}", g.phrase()))).collect(),
            GroupPair::all().into_iter().map(|p| (p, format!("{} and {} keep apart", p.first.phrase(), p.second.phrase()))).collect::<BTreeMap<_, _>>(),
        )
        .unwrap()
    }

    fn model() -> AlignmentModel {
        AlignmentModel::new(&AlignConfig::default(), FeatureNormalizer::identity(FEATURE_DIM), 3)
    }

    #[test]
    fn progressive_fuse_examples() {
        let z = [0.0, 0.0];
        let c = progressive_fuse((&[1.0, 2.0], &[1.0, 1.0]), (&z, &[3.0, 3.0]), (&z, &[5.0, 5.0]), FusionGains::default())
            .unwrap();
        assert_eq!(c.z_inter, c.z_global);
        assert_eq!(c.z_joint, c.z_global);
        let t = progressive_fuse((&[1.0, 0.0], &[1.0, 1.0]), (&[0.0, 1.0], &[1.0, 1.0]), (&[1.0, 1.0], &[1.0, 1.0]), FusionGains::default())
            .unwrap();
        assert_eq!(t.z_inter, vec![2.0, 2.0]);
        assert!(progressive_fuse((&[1.0], &[1.0]), (&z, &z), (&z, &z), FusionGains::default()).is_err());
    }

    #[test]
    fn level_parsing() {
        assert_eq!("gj".parse::<TextLevel>().unwrap(), TextLevel::Joint);
        assert_eq!("Interaction".parse::<TextLevel>().unwrap(), TextLevel::Interaction);
        assert!(matches!("fine".parse::<TextLevel>(), Err(Error::InvalidLevel(_))));
    }

    #[test]
    fn global_level_ignores_finer_texts() {
        let m = model();
        let a = annotation("a person waves", "moves up");
        let b = annotation("a person waves", "remains still");
        let za = m.embed_text(&a, TextLevel::Global).unwrap();
        assert_eq!(za, m.embed_text(&b, TextLevel::Global).unwrap());
        assert_eq!(za, m.embed_caption("a person waves").unwrap());
        assert_ne!(m.embed_text(&a, TextLevel::Joint).unwrap(), m.embed_text(&b, TextLevel::Joint).unwrap());
        assert_eq!(m.embed_text(&a, TextLevel::Interaction).unwrap(), m.embed_text(&a, TextLevel::Interaction).unwrap());
    }

    #[test]
    fn fused_latents_match_progressive_fuse() {
        let m = model();
        let a = annotation("a person squats", "bends");
        let l = m.latents(&a).unwrap();
        // Gains start at zero, so each level adds only means.
        assert_eq!(m.fusion_gains(), FusionGains::default());
        assert_eq!(l.z_global, m.embed_text(&a, TextLevel::Global).unwrap());
        let (n_c, n_j) = (m.condition_tokens(&a, TextLevel::Global).unwrap().rows(), 6);
        assert_eq!(m.condition_tokens(&a, TextLevel::Interaction).unwrap().rows(), n_c + n_j + 15);
    }

    #[test]
    fn decoder_shape_and_checkpoint_round_trip() {
        let m = model();
        let out = m.decode(&vec![0.1; 32], 7).unwrap();
        assert_eq!(out.features().shape(), (7, FEATURE_DIM));
        let mut m2 = m.clone();
        m2.store.snap_to_f32();
        let ck = m2.to_checkpoint(&PipelineConfig { seed: 3, ..PipelineConfig::default() });
        let back = AlignmentModel::from_checkpoint(&Checkpoint::from_bytes(&ck.to_bytes()).unwrap()).unwrap();
        let a = annotation("walk", "moves");
        assert_eq!(back.embed_text(&a, TextLevel::Joint).unwrap(), m2.embed_text(&a, TextLevel::Joint).unwrap());
    }
}
