use std::f64::consts::FRAC_PI_2;

use rand::seq::index::sample;
use rand::Rng as _;

use crate::alignment::{AlignmentModel, TextLevel};
use crate::annotation::HierarchicalAnnotation;
use crate::checkpoint::Checkpoint;
use crate::config::{PipelineConfig, Section};
use crate::error::{Error, Result};
use crate::nn::{
    sinusoidal_positions, Adam, Ctx, Embedding, Graph, Linear, ParamId, ParamStore, Tensor, TrainingLog, Transformer,
    Var,
};
use crate::rng::{seeded_permutation, substream, Rng};

use super::rqvae::MotionTokenGrid;

pub const CHECKPOINT_TAG: &str = "gen";

/// Rows each level adds after the caption tokens.
fn extra_rows(level: TextLevel) -> usize {
    match level {
        TextLevel::Global => 0,
        TextLevel::Joint => 6,
        TextLevel::Interaction => 21,
    }
}

/// Encoded text tokens for one conditioning level: caption tokens, then the
/// six group rows (from `G+J`), then the fifteen pair rows (at `G+J+I`).
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionTokens {
    pub level: TextLevel,
    pub tokens: Tensor,
    caption_rows: usize,
}

impl ConditionTokens {
    pub fn new(tokens: Tensor, level: TextLevel) -> Result<Self> {
        let extra = extra_rows(level);
        if tokens.rows() <= extra {
            return Err(Error::Dim(format!("{} condition rows cannot hold level {level}", tokens.rows())));
        }
        Ok(Self { level, caption_rows: tokens.rows() - extra, tokens })
    }

    pub fn from_annotation(align: &AlignmentModel, annotation: &HierarchicalAnnotation, level: TextLevel) -> Result<Self> {
        Self::new(align.condition_tokens(annotation, level)?, level)
    }

    pub fn from_caption(align: &AlignmentModel, caption: &str) -> Result<Self> {
        Self::new(align.caption_tokens(caption)?, TextLevel::Global)
    }

    /// The same text at a coarser (or equal) level.
    pub fn at_level(&self, level: TextLevel) -> Result<Self> {
        if level > self.level {
            return Err(Error::InvalidLevel(format!("cannot raise {} conditioning to {level}", self.level)));
        }
        Self::new(self.tokens.slice_rows(0, self.caption_rows + extra_rows(level)), level)
    }

    pub fn len(&self) -> usize {
        self.tokens.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.rows() == 0
    }

    /// Segment of each row: 0 caption, 1 group, 2 pair.
    pub fn segments(&self) -> Vec<usize> {
        (0..self.len()).map(|r| if r < self.caption_rows { 0 } else if r < self.caption_rows + 6 { 1 } else { 2 }).collect()
    }
}

/// Projects condition tokens into the generator width; `None` selects the
/// learned null condition used for classifier-free guidance.
#[derive(Clone, Debug)]
struct CondEmbed {
    proj: Linear,
    segment: Embedding,
    null: ParamId,
}

impl CondEmbed {
    fn new(store: &mut ParamStore, name: &str, cond_dim: usize, dim: usize, rng: &mut Rng) -> Self {
        Self {
            proj: Linear::new(store, &format!("{name}.proj"), cond_dim, dim, rng),
            segment: Embedding::new(store, &format!("{name}.segment"), 3, dim, rng),
            null: store.normal(format!("{name}.null"), 1, dim, 0.02, rng),
        }
    }

    fn forward(&self, cx: &Ctx, cond: Option<&ConditionTokens>) -> Var {
        let g = cx.g;
        match cond {
            None => cx.p(self.null),
            Some(c) => g.add(self.proj.forward(cx, g.leaf(c.tokens.clone())), self.segment.forward(cx, &c.segments())),
        }
    }
}

/// Bidirectional transformer over `[condition; base-layer tokens]` predicting
/// the base-layer code at every position. One weight set serves all levels.
#[derive(Clone, Debug)]
pub struct MaskedGenerator {
    cond: CondEmbed,
    tokens: Embedding,
    body: Transformer,
    head: Linear,
    pub dim: usize,
    pub codes: usize,
}

/// Hidden motion rows after each block, and the output logits.
pub struct GeneratorPass {
    pub logits: Var,
    pub hidden: Vec<Var>,
}

impl MaskedGenerator {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        cond_dim: usize,
        dim: usize,
        depth: usize,
        heads: usize,
        codes: usize,
        rng: &mut Rng,
    ) -> Self {
        Self {
            cond: CondEmbed::new(store, &format!("{name}.cond"), cond_dim, dim, rng),
            tokens: Embedding::new(store, &format!("{name}.tokens"), codes + 1, dim, rng),
            body: Transformer::new(store, &format!("{name}.body"), dim, depth, heads, rng),
            head: Linear::new(store, &format!("{name}.head"), dim, codes, rng),
            dim,
            codes,
        }
    }

    /// Index of the mask token.
    pub fn mask_token(&self) -> usize {
        self.codes
    }

    pub fn depth(&self) -> usize {
        self.body.blocks.len()
    }

    /// Forward pass with optional additions to the motion rows: `input` before
    /// the first block and `after_block[i]` after block `i`.
    pub fn forward_with(
        &self,
        cx: &Ctx,
        cond: Option<&ConditionTokens>,
        tokens: &[usize],
        input: Option<Var>,
        after_block: &[Option<Var>],
    ) -> GeneratorPass {
        let g = cx.g;
        let n = tokens.len();
        let c = self.cond.forward(cx, cond);
        let nc = g.shape(c).0;
        let mut m = g.add(self.tokens.forward(cx, tokens), g.leaf(sinusoidal_positions(n, self.dim)));
        if let Some(v) = input {
            m = g.add(m, v);
        }
        let mut x = g.concat_rows(&[c, m]);
        let mut hidden = Vec::with_capacity(self.depth());
        for (i, block) in self.body.blocks.iter().enumerate() {
            x = block.forward(cx, x, None);
            if let Some(Some(v)) = after_block.get(i) {
                let motion = g.add(g.slice_rows(x, nc, n), *v);
                x = g.concat_rows(&[g.slice_rows(x, 0, nc), motion]);
            }
            hidden.push(g.slice_rows(x, nc, n));
        }
        let out = self.body.final_norm.forward(cx, g.slice_rows(x, nc, n));
        GeneratorPass { logits: self.head.forward(cx, out), hidden }
    }

    pub fn logits(&self, cx: &Ctx, cond: Option<&ConditionTokens>, tokens: &[usize]) -> Var {
        self.forward_with(cx, cond, tokens, None, &[]).logits
    }
}

/// Predicts residual layer `q` from the sum of the code embeddings of layers `< q`.
#[derive(Clone, Debug)]
pub struct ResidualGenerator {
    cond: CondEmbed,
    layer_tokens: Vec<Embedding>,
    layer_index: Embedding,
    body: Transformer,
    heads: Vec<Linear>,
    dim: usize,
}

impl ResidualGenerator {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        cond_dim: usize,
        dim: usize,
        depth: usize,
        heads: usize,
        codes: usize,
        layers: usize,
        rng: &mut Rng,
    ) -> Self {
        Self {
            cond: CondEmbed::new(store, &format!("{name}.cond"), cond_dim, dim, rng),
            layer_tokens: (0..layers - 1).map(|q| Embedding::new(store, &format!("{name}.tokens{q}"), codes, dim, rng)).collect(),
            layer_index: Embedding::new(store, &format!("{name}.layer"), layers, dim, rng),
            body: Transformer::new(store, &format!("{name}.body"), dim, depth, heads, rng),
            heads: (1..layers).map(|q| Linear::new(store, &format!("{name}.head{q}"), dim, codes, rng)).collect(),
            dim,
        }
    }

    /// Logits for layer `q ≥ 1` given token columns whose first `q` entries are known.
    pub fn logits(&self, cx: &Ctx, cond: Option<&ConditionTokens>, columns: &[Vec<usize>], q: usize) -> Var {
        let g = cx.g;
        let n = columns.len();
        let mut m = g.leaf(sinusoidal_positions(n, self.dim));
        for (l, table) in self.layer_tokens.iter().enumerate().take(q) {
            let ids: Vec<usize> = columns.iter().map(|c| c[l]).collect();
            m = g.add(m, table.forward(cx, &ids));
        }
        m = g.add_row(m, self.layer_index.forward(cx, &[q]));
        let c = self.cond.forward(cx, cond);
        let nc = g.shape(c).0;
        let x = self.body.forward(cx, g.concat_rows(&[c, m]), None);
        self.heads[q - 1].forward(cx, g.slice_rows(x, nc, n))
    }
}

/// Base-layer and residual generators sharing one parameter store.
#[derive(Clone, Debug)]
pub struct GeneratorModel {
    pub config: PipelineConfig,
    pub store: ParamStore,
    pub masked: MaskedGenerator,
    pub residual: Option<ResidualGenerator>,
}

impl GeneratorModel {
    pub fn new(config: &PipelineConfig) -> Result<Self> {
        config.validate()?;
        let (gc, rq) = (&config.gen, &config.rqvae);
        let cond_dim = config.align.latent_dim;
        let mut rng = substream(config.seed, "gen.init");
        let mut store = ParamStore::new();
        let masked = MaskedGenerator::new(&mut store, "mask", cond_dim, gc.dim, gc.depth, gc.heads, rq.codebook_size, &mut rng);
        let residual = (rq.layers > 1).then(|| {
            ResidualGenerator::new(
                &mut store,
                "res",
                cond_dim,
                gc.dim,
                gc.residual_depth,
                gc.heads,
                rq.codebook_size,
                rq.layers,
                &mut rng,
            )
        });
        Ok(Self { config: config.clone(), store, masked, residual })
    }

    pub fn codes(&self) -> usize {
        self.masked.codes
    }

    pub fn layers(&self) -> usize {
        self.config.rqvae.layers
    }

    /// Base-layer logits as a plain tensor.
    pub fn base_logits(&self, cond: Option<&ConditionTokens>, tokens: &[usize]) -> Tensor {
        let g = Graph::new();
        let cx = Ctx::new(&g, &self.store);
        g.tensor(self.masked.logits(&cx, cond, tokens))
    }

    pub fn residual_logits(&self, cond: Option<&ConditionTokens>, columns: &[Vec<usize>], q: usize) -> Result<Tensor> {
        let res = self.residual.as_ref().ok_or_else(|| Error::InvalidArgument("model has a single quantizer layer".into()))?;
        if q == 0 || q >= self.layers() {
            return Err(Error::InvalidArgument(format!("residual layer {q} outside 1..{}", self.layers())));
        }
        let g = Graph::new();
        let cx = Ctx::new(&g, &self.store);
        Ok(g.tensor(res.logits(&cx, cond, columns, q)))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(CHECKPOINT_TAG, &self.config, Section::Gen);
        ck.insert_store(&self.store);
        let c = &self.config;
        let dims = [c.align.latent_dim, c.rqvae.codebook_size, c.rqvae.layers].map(|v| v as f64);
        ck.insert("dims", Tensor::row_vector(dims.to_vec()));
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.tag != CHECKPOINT_TAG {
            return Err(Error::format("checkpoint", format!("expected a {CHECKPOINT_TAG} checkpoint, found {}", ck.tag)));
        }
        let mut config = ck.config()?;
        // Shapes that come from other sections travel as a blob.
        match ck.get("dims")?.data() {
            &[cond, codes, layers] => {
                config.align.latent_dim = cond as usize;
                config.rqvae.codebook_size = codes as usize;
                config.rqvae.layers = layers as usize;
            }
            _ => return Err(Error::format("checkpoint", "gen dims blob must hold three values")),
        }
        let mut model = Self::new(&config)?;
        ck.load_store(&mut model.store)?;
        Ok(model)
    }
}

/// `uncond + scale · (cond − uncond)`; scale 0 returns `uncond` exactly.
pub fn guided_logits(cond: &Tensor, uncond: &Tensor, scale: f64) -> Tensor {
    if scale == 0.0 {
        return uncond.clone();
    }
    cond.zip_map(uncond, |c, u| u + scale * (c - u))
}

/// Training example for one grid: the conditioning caption, level and the
/// masked input.
pub(crate) struct MaskedExample {
    pub caption: usize,
    pub level: TextLevel,
    pub dropped: bool,
    pub input: Vec<usize>,
    /// `(position, target code)` for every masked position.
    pub targets: Vec<(usize, usize)>,
    pub residual_layer: usize,
}

/// Draws the random parts of one training step in a fixed order so that the
/// stream does not depend on the data.
pub(crate) fn draw_example(base: &[usize], captions: usize, layers: usize, mask_token: usize, dropout: f64, rng: &mut Rng) -> MaskedExample {
    let caption = rng.random_range(0..captions);
    let level = TextLevel::ALL[rng.random_range(0..3)];
    let dropped = rng.random::<f64>() < dropout;
    let n = base.len();
    let frac = (FRAC_PI_2 * rng.random::<f64>()).cos();
    let count = ((frac * n as f64).ceil() as usize).clamp(1, n);
    let mut picks = sample(rng, n, count).into_vec();
    picks.sort_unstable();
    let mut input = base.to_vec();
    let mut targets = Vec::with_capacity(count);
    for p in picks {
        targets.push((p, base[p]));
        input[p] = mask_token;
    }
    let residual_layer = if layers > 1 { rng.random_range(1..layers) } else { 0 };
    MaskedExample { caption, level, dropped, input, targets, residual_layer }
}

/// Mean negative log-likelihood of `targets` under row-wise softmax of `logits`.
pub(crate) fn cross_entropy(g: &Graph, logits: Var, targets: &[(usize, usize)]) -> Var {
    let picked = g.pick(g.log_softmax(logits), targets);
    g.neg(g.mean(picked))
}

/// Condition tokens for every caption of every annotation at the finest level.
pub(crate) fn all_conditions(
    align: &AlignmentModel,
    annotations: &[&HierarchicalAnnotation],
) -> Result<Vec<Vec<ConditionTokens>>> {
    annotations
        .iter()
        .map(|a| {
            (0..a.global_texts.len())
                .map(|k| ConditionTokens::new(align.condition_tokens_for(a, k, TextLevel::Interaction)?, TextLevel::Interaction))
                .collect()
        })
        .collect()
}

fn check_corpus(data: &[(MotionTokenGrid, HierarchicalAnnotation)], config: &PipelineConfig) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InsufficientSamples("generator training needs at least one token grid".into()));
    }
    for (grid, _) in data {
        grid.validate(config.rqvae.codebook_size, config.rqvae.layers)?;
    }
    Ok(())
}

/// Trains the base and residual generators.
///
/// Each sample draws a caption, a conditioning level (uniform over the three),
/// condition dropout, a cosine-scheduled mask over base-layer tokens and a
/// residual layer to predict.
pub fn train_generator(
    data: &[(MotionTokenGrid, HierarchicalAnnotation)],
    align: &AlignmentModel,
    config: &PipelineConfig,
) -> Result<(GeneratorModel, TrainingLog)> {
    check_corpus(data, config)?;
    let mut model = GeneratorModel::new(config)?;
    let conds = all_conditions(align, &data.iter().map(|(_, a)| a).collect::<Vec<_>>())?;
    let mut rng = substream(config.seed, "gen.train");
    let mut opt = Adam::new(config.gen.lr);
    let mut log = TrainingLog::default();
    let batch = config.gen.batch_size.max(1);
    for epoch in 0..config.gen.epochs {
        let order = seeded_permutation(data.len(), rng.random());
        let (mut total, mut base_sum, mut res_sum, mut batches) = (0.0, 0.0, 0.0, 0usize);
        for chunk in order.chunks(batch) {
            let g = Graph::new();
            let cx = Ctx::new(&g, &model.store);
            let mut base_terms = Vec::new();
            let mut res_terms = Vec::new();
            for &i in chunk {
                let grid = &data[i].0;
                let ex = draw_example(&grid.base(), conds[i].len(), model.layers(), model.masked.mask_token(), config.gen.cond_dropout, &mut rng);
                let cond = if ex.dropped { None } else { Some(conds[i][ex.caption].at_level(ex.level)?) };
                let logits = model.masked.logits(&cx, cond.as_ref(), &ex.input);
                base_terms.push(cross_entropy(&g, logits, &ex.targets));
                if let Some(res) = &model.residual {
                    let q = ex.residual_layer;
                    let logits = res.logits(&cx, cond.as_ref(), &grid.tokens, q);
                    let targets: Vec<(usize, usize)> = grid.layer(q).into_iter().enumerate().collect();
                    res_terms.push(cross_entropy(&g, logits, &targets));
                }
            }
            let mean = |terms: Vec<Var>| {
                let n = terms.len() as f64;
                terms.into_iter().reduce(|a, b| g.add(a, b)).map(|s| g.scale(s, 1.0 / n))
            };
            let base = mean(base_terms).expect("nonempty batch");
            let res = mean(res_terms);
            let loss = res.map_or(base, |r| g.add(base, r));
            let value = g.item(loss);
            if !value.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            base_sum += g.item(base);
            res_sum += res.map_or(0.0, |r| g.item(r));
            let grads = g.backward(loss);
            let pg = cx.param_grads(&grads);
            drop(cx);
            opt.step(&mut model.store, &pg);
            total += value;
            batches += 1;
        }
        let n = batches as f64;
        let mut terms = std::collections::BTreeMap::from([("mask_ce".to_string(), base_sum / n)]);
        if model.residual.is_some() {
            terms.insert("res_ce".to_string(), res_sum / n);
        }
        log.push(epoch, total / n, terms);
    }
    model.store.snap_to_f32();
    Ok((model, log))
}

/// Fraction of masked base-layer positions predicted correctly (argmax)
/// under full conditioning, with masks drawn as in training.
pub fn masked_token_accuracy(
    model: &GeneratorModel,
    data: &[(MotionTokenGrid, HierarchicalAnnotation)],
    align: &AlignmentModel,
    repeats: usize,
    seed: u64,
) -> Result<f64> {
    let conds = all_conditions(align, &data.iter().map(|(_, a)| a).collect::<Vec<_>>())?;
    let mut rng = substream(seed, "gen.accuracy");
    let (mut hit, mut n) = (0usize, 0usize);
    for _ in 0..repeats {
        for (i, (grid, _)) in data.iter().enumerate() {
            let ex = draw_example(&grid.base(), conds[i].len(), model.layers(), model.masked.mask_token(), 0.0, &mut rng);
            let logits = model.base_logits(Some(&conds[i][ex.caption]), &ex.input);
            for &(p, t) in &ex.targets {
                hit += usize::from(logits.argmax_row(p) == t);
                n += 1;
            }
        }
    }
    Ok(hit as f64 / n.max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AlignConfig;
    use crate::generation::TemplateReasoner;
    use crate::generation::ReasonerClient;
    use crate::representation::{FeatureNormalizer, FEATURE_DIM};

    pub(crate) fn tiny_config() -> PipelineConfig {
        let mut c = PipelineConfig::default();
        c.align = AlignConfig { latent_dim: 16, depth: 1, ..AlignConfig::default() };
        c.rqvae.codebook_size = 8;
        c.gen.dim = 16;
        c.gen.depth = 2;
        c.gen.residual_depth = 1;
        c.gen.epochs = 3;
        c
    }

    fn tiny_data(align: &AlignmentModel) -> Vec<(MotionTokenGrid, HierarchicalAnnotation)> {
        let _ = align;
        ["a person waves the left arm", "a person walks forward", "someone squats"]
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let tokens = (0..5).map(|c| vec![(c + i) % 8, (c * 3 + i) % 8, c % 8]).collect();
                (MotionTokenGrid { tokens, downsample: 4, frames: 20 }, TemplateReasoner.expand(t).unwrap())
            })
            .collect()
    }

    #[test]
    fn condition_levels_nest() {
        let cfg = tiny_config();
        let align = AlignmentModel::new(&cfg.align, FeatureNormalizer::identity(FEATURE_DIM), 0);
        let ann = TemplateReasoner.expand("a person waves").unwrap();
        let full = ConditionTokens::from_annotation(&align, &ann, TextLevel::Interaction).unwrap();
        let caption_rows = full.len() - 21;
        let gj = full.at_level(TextLevel::Joint).unwrap();
        assert_eq!(gj.len(), caption_rows + 6);
        assert_eq!(gj, ConditionTokens::from_annotation(&align, &ann, TextLevel::Joint).unwrap());
        let g = full.at_level(TextLevel::Global).unwrap();
        assert_eq!(g.tokens, ConditionTokens::from_caption(&align, "a person waves").unwrap().tokens);
        assert!(g.at_level(TextLevel::Joint).is_err());
        assert_eq!(full.segments().iter().filter(|&&s| s == 2).count(), 15);
    }

    #[test]
    fn logits_are_finite_and_guidance_zero_is_unconditional() {
        let cfg = tiny_config();
        let align = AlignmentModel::new(&cfg.align, FeatureNormalizer::identity(FEATURE_DIM), 0);
        let model = GeneratorModel::new(&cfg).unwrap();
        let ann = TemplateReasoner.expand("a person waves").unwrap();
        let cond = ConditionTokens::from_annotation(&align, &ann, TextLevel::Joint).unwrap();
        let tokens = vec![8, 1, 8, 3];
        let c = model.base_logits(Some(&cond), &tokens);
        let u = model.base_logits(None, &tokens);
        assert_eq!(c.shape(), (4, 8));
        assert!(c.is_finite());
        for r in 0..4 {
            let m = c.row(r).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = c.row(r).iter().map(|v| (v - m).exp()).sum();
            let total: f64 = c.row(r).iter().map(|v| (v - m).exp() / z).sum();
            assert!((total - 1.0).abs() < 1e-6);
        }
        assert_eq!(guided_logits(&c, &u, 0.0), u);
        assert!(guided_logits(&c, &u, 1.0).max_abs_diff(&c) < 1e-12);
        let cols: Vec<Vec<usize>> = (0..4).map(|i| vec![i, 0, 0]).collect();
        assert_eq!(model.residual_logits(Some(&cond), &cols, 1).unwrap().shape(), (4, 8));
        assert!(model.residual_logits(Some(&cond), &cols, 3).is_err());
    }

    #[test]
    fn training_is_deterministic_and_checkpoints_round_trip() {
        let cfg = tiny_config();
        let align = AlignmentModel::new(&cfg.align, FeatureNormalizer::identity(FEATURE_DIM), 0);
        let data = tiny_data(&align);
        let (a, la) = train_generator(&data, &align, &cfg).unwrap();
        let (b, lb) = train_generator(&data, &align, &cfg).unwrap();
        assert_eq!(la.to_text(), lb.to_text());
        assert_eq!(a.store.checksum(""), b.store.checksum(""));
        let back = GeneratorModel::from_checkpoint(&Checkpoint::from_bytes(&a.to_checkpoint().to_bytes()).unwrap()).unwrap();
        assert_eq!(back.store.checksum(""), a.store.checksum(""));
    }

    #[test]
    fn full_dropout_ignores_captions() {
        let mut cfg = tiny_config();
        cfg.gen.cond_dropout = 1.0;
        let align = AlignmentModel::new(&cfg.align, FeatureNormalizer::identity(FEATURE_DIM), 0);
        let data = tiny_data(&align);
        let mut permuted = data.clone();
        let anns: Vec<_> = data.iter().map(|(_, a)| a.clone()).collect();
        for (i, (_, a)) in permuted.iter_mut().enumerate() {
            *a = anns[(i + 1) % anns.len()].clone();
        }
        let (_, la) = train_generator(&data, &align, &cfg).unwrap();
        let (_, lb) = train_generator(&permuted, &align, &cfg).unwrap();
        assert_eq!(la.losses(), lb.losses());
    }

    #[test]
    fn bad_grids_are_rejected() {
        let cfg = tiny_config();
        let align = AlignmentModel::new(&cfg.align, FeatureNormalizer::identity(FEATURE_DIM), 0);
        assert!(matches!(train_generator(&[], &align, &cfg), Err(Error::InsufficientSamples(_))));
        let mut data = tiny_data(&align);
        data[0].0.tokens[0][0] = 9;
        assert!(train_generator(&data, &align, &cfg).is_err());
    }
}
