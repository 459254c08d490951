use std::collections::BTreeMap;

use rand::Rng as _;

use crate::alignment::AlignmentModel;
use crate::annotation::HierarchicalAnnotation;
use crate::checkpoint::Checkpoint;
use crate::config::{ControlConfig, PipelineConfig, Section};
use crate::error::{Error, Result};
use crate::eval::constraint_metrics;
use crate::generation::generator::{all_conditions, cross_entropy, draw_example};
use crate::generation::{
    generate, ConditionTokens, GenerationModels, GenerationOutput, GeneratorModel, GeneratorPass, LogitSource,
    MaskedGenerator, MotionTokenGrid, ReasonerClient, RqVae, SamplingOptions,
};
use crate::nn::{Adam, Conv1d, Ctx, Graph, Linear, ParamStore, Tensor, TrainingLog, Var};
use crate::representation::JOINT_COUNT;
use crate::rng::{seeded_permutation, substream, Rng};

use super::constraint::TrajectoryConstraint;
use super::loss::{control_loss_var, local_to_global_var};

pub const CHECKPOINT_TAG: &str = "control";

/// Input channels per frame: xyz target and mask flag for each joint.
pub const TRAJECTORY_CHANNELS: usize = 4 * JOINT_COUNT;

/// Per-frame encoder input, `T_pad × 88`, zero-padded to a multiple of
/// `downsample` frames. Targets at inactive entries are zero whatever the
/// constraint holds there.
pub fn trajectory_input(constraint: &TrajectoryConstraint, downsample: usize) -> Tensor {
    let frames = constraint.frames().div_ceil(downsample) * downsample;
    let mut x = Tensor::zeros(frames, TRAJECTORY_CHANNELS);
    for (t, j, p) in constraint.active() {
        for k in 0..3 {
            x.set(t, 4 * j + k, p[k]);
        }
        x.set(t, 4 * j + 3, 1.0);
    }
    x
}

/// Convolution stack from per-frame constraints to one control token per
/// motion token: an input conv, one stride-2 conv per halving, an output conv.
#[derive(Clone, Debug)]
pub struct SpatialEncoder {
    convs: Vec<Conv1d>,
    pub downsample: usize,
}

impl SpatialEncoder {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, downsample: usize, rng: &mut Rng) -> Self {
        let mut convs = vec![Conv1d::new(store, &format!("{name}.in"), TRAJECTORY_CHANNELS, dim, 3, 1, 1, rng)];
        for i in 0..downsample.trailing_zeros() as usize {
            convs.push(Conv1d::new(store, &format!("{name}.down{i}"), dim, dim, 4, 2, 1, rng));
        }
        convs.push(Conv1d::new(store, &format!("{name}.out"), dim, dim, 3, 1, 1, rng));
        Self { convs, downsample }
    }

    pub fn forward(&self, cx: &Ctx, x: Var) -> Var {
        let last = self.convs.len() - 1;
        let mut h = x;
        for (i, conv) in self.convs.iter().enumerate() {
            h = conv.forward(cx, h);
            if i < last {
                h = cx.g.relu(h);
            }
        }
        h
    }
}

/// Trainable copy of the base generator plus zero-initialized links that add
/// its hidden states into the frozen generator after each block.
#[derive(Clone, Debug)]
pub struct ControlModel {
    pub config: PipelineConfig,
    pub store: ParamStore,
    pub spatial: SpatialEncoder,
    pub copy: MaskedGenerator,
    /// One link per generator block; `None` where nothing is injected.
    pub links: Vec<Option<Linear>>,
}

impl ControlModel {
    /// A fresh branch for `gen`: the copy starts from the generator's weights
    /// and every link is exactly zero.
    pub fn new(control: &ControlConfig, gen: &GeneratorModel, downsample: usize) -> Result<Self> {
        let mut config = gen.config.clone();
        config.control = control.clone();
        config.rqvae.downsample = downsample;
        config.validate()?;
        let gc = &config.gen;
        let every = match control.inject.as_str() {
            "all" => true,
            "first" => false,
            other => return Err(Error::Config(format!("control.inject must be all or first, got {other:?}"))),
        };
        let mut rng = substream(config.seed, "control.init");
        let mut store = ParamStore::new();
        let spatial = SpatialEncoder::new(&mut store, "spatial", gc.dim, downsample, &mut rng);
        let copy = MaskedGenerator::new(&mut store, "copy", config.align.latent_dim, gc.dim, gc.depth, gc.heads, gen.codes(), &mut rng);
        let links = (0..copy.depth())
            .map(|i| (every || i == 0).then(|| Linear::zeroed(&mut store, &format!("link{i}"), gc.dim, gc.dim)))
            .collect();
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let name = store.name(id).to_string();
            if let Some(rest) = name.strip_prefix("copy.") {
                let src = gen.store.id(&format!("mask.{rest}")).ok_or_else(|| Error::Dim(format!("generator has no mask.{rest}")))?;
                *store.get_mut(id) = gen.store.get(src).clone();
            }
        }
        Ok(Self { config, store, spatial, copy, links })
    }

    pub fn downsample(&self) -> usize {
        self.spatial.downsample
    }

    /// Control tokens, `T′ × d`, for a constraint.
    pub fn encode_trajectory(&self, constraint: &TrajectoryConstraint) -> Tensor {
        let g = Graph::new();
        let cx = Ctx::new(&g, &self.store);
        let x = g.leaf(trajectory_input(constraint, self.downsample()));
        g.tensor(self.spatial.forward(&cx, x))
    }

    /// Generator pass with control injected. `traj` is the encoder input;
    /// `gen_cx` must bind the generator store and `cx` this store.
    pub fn forward(
        &self,
        gen_cx: &Ctx,
        cx: &Ctx,
        gen: &GeneratorModel,
        cond: Option<&ConditionTokens>,
        tokens: &[usize],
        traj: Var,
    ) -> GeneratorPass {
        let spatial = self.spatial.forward(cx, traj);
        let copy = self.copy.forward_with(cx, cond, tokens, Some(spatial), &[]);
        let after: Vec<Option<Var>> =
            self.links.iter().zip(&copy.hidden).map(|(l, &h)| l.as_ref().map(|l| l.forward(cx, h))).collect();
        gen.masked.forward_with(gen_cx, cond, tokens, None, &after)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(CHECKPOINT_TAG, &self.config, Section::Control);
        ck.insert_store(&self.store);
        ck.insert("dims", Tensor::scalar(self.downsample() as f64));
        ck
    }

    /// Restores a branch for `gen`, which supplies every shape but the downsample factor.
    pub fn from_checkpoint(ck: &Checkpoint, gen: &GeneratorModel) -> Result<Self> {
        if ck.tag != CHECKPOINT_TAG {
            return Err(Error::format("checkpoint", format!("expected a {CHECKPOINT_TAG} checkpoint, found {}", ck.tag)));
        }
        let control = ck.config()?.control;
        let r = ck.get("dims")?.item() as usize;
        let mut model = Self::new(&control, gen, r)?;
        ck.load_store(&mut model.store)?;
        Ok(model)
    }
}

/// The frozen generator steered by a control branch and one constraint.
/// The unconditional half of guidance is steered too.
pub struct ControlledGenerator<'a> {
    gen: &'a GeneratorModel,
    control: &'a ControlModel,
    input: Tensor,
}

impl<'a> ControlledGenerator<'a> {
    pub fn new(gen: &'a GeneratorModel, control: &'a ControlModel, constraint: &TrajectoryConstraint) -> Self {
        Self { gen, control, input: trajectory_input(constraint, control.downsample()) }
    }
}

impl LogitSource for ControlledGenerator<'_> {
    fn base_logits(&self, cond: Option<&ConditionTokens>, tokens: &[usize]) -> Tensor {
        let g = Graph::new();
        let gen_cx = Ctx::new(&g, &self.gen.store);
        let cx = Ctx::new(&g, &self.control.store);
        let traj = g.leaf(self.input.clone());
        g.tensor(self.control.forward(&gen_cx, &cx, self.gen, cond, tokens, traj).logits)
    }

    fn model(&self) -> &GeneratorModel {
        self.gen
    }
}

/// One training example: a token grid, its annotation and a trajectory constraint.
pub type ControlExample = (MotionTokenGrid, HierarchicalAnnotation, TrajectoryConstraint);

fn check_examples(data: &[ControlExample], gen: &GeneratorModel, r: usize) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InsufficientSamples("control training needs at least one example".into()));
    }
    for (grid, _, c) in data {
        grid.validate(gen.codes(), gen.layers())?;
        if grid.downsample != r || c.frames() != grid.frames {
            return Err(Error::Dim(format!("{}-frame constraint against a {}-frame grid", c.frames(), grid.frames)));
        }
        if c.active_count() == 0 {
            return Err(Error::EmptyMask);
        }
    }
    Ok(())
}

/// Decoded world positions of a soft token grid: masked base positions use
/// the softmax-weighted mix of base codes, the rest their true codes.
fn soft_positions(
    g: &Graph,
    rq_cx: &Ctx,
    rqvae: &RqVae,
    logits: Var,
    grid: &MotionTokenGrid,
    targets: &[(usize, usize)],
) -> Var {
    let (n, k) = g.shape(logits);
    let mut masked = Tensor::zeros(n, 1);
    let mut fixed = Tensor::zeros(n, k);
    for &(p, _) in targets {
        masked.set(p, 0, 1.0);
    }
    for (p, col) in grid.tokens.iter().enumerate() {
        if masked.get(p, 0) == 0.0 {
            fixed.set(p, col[0], 1.0);
        }
    }
    let weights = g.add(g.mul_col(g.softmax(logits), g.leaf(masked)), g.leaf(fixed));
    let base = g.matmul(weights, rq_cx.p(rqvae.codebook_param(0)));
    let books = rqvae.codebooks();
    let mut rest = Tensor::zeros(n, books.code_dim());
    for (p, col) in grid.tokens.iter().enumerate() {
        for (q, &code) in col.iter().enumerate().skip(1) {
            for (v, c) in rest.row_mut(p).iter_mut().zip(books.codes[q].row(code)) {
                *v += c;
            }
        }
    }
    let z = g.add(base, g.leaf(rest));
    let feats = g.slice_rows(rqvae.decode_var(rq_cx, z), 0, grid.frames);
    let norm = &rqvae.normalizer;
    let feats = g.add_row(g.mul_row(feats, g.leaf(Tensor::row_vector(norm.std.clone()))), g.leaf(Tensor::row_vector(norm.mean.clone())));
    local_to_global_var(g, feats)
}

/// Trains a control branch for the frozen `gen`.
///
/// The loss is masked-token cross-entropy plus `lambda_c` times the control
/// loss of the motion decoded from a softmax-weighted code mixture. Fails
/// with [`Error::FrozenWeightMutation`] if the generator or tokenizer changed.
pub fn train_control(
    data: &[ControlExample],
    gen: &GeneratorModel,
    rqvae: &RqVae,
    align: &AlignmentModel,
    config: &PipelineConfig,
) -> Result<(ControlModel, TrainingLog)> {
    let r = rqvae.config.downsample;
    check_examples(data, gen, r)?;
    let frozen = (gen.store.checksum(""), rqvae.store.checksum(""));
    let mut model = ControlModel::new(&config.control, gen, r)?;
    let lambda = config.control.lambda_c;
    let conds = all_conditions(align, &data.iter().map(|(_, a, _)| a).collect::<Vec<_>>())?;
    let inputs: Vec<Tensor> = data.iter().map(|(_, _, c)| trajectory_input(c, r)).collect();
    let mut rng = substream(config.seed, "control.train");
    let mut opt = Adam::new(config.control.lr);
    let mut log = TrainingLog::default();
    let batch = config.gen.batch_size.max(1);
    for epoch in 0..config.control.epochs {
        let order = seeded_permutation(data.len(), rng.random());
        let (mut total, mut ce_sum, mut ctl_sum, mut batches) = (0.0, 0.0, 0.0, 0usize);
        for chunk in order.chunks(batch) {
            let g = Graph::new();
            let gen_cx = Ctx::new(&g, &gen.store);
            let rq_cx = Ctx::new(&g, &rqvae.store);
            let cx = Ctx::new(&g, &model.store);
            let (mut ce_terms, mut ctl_terms) = (Vec::new(), Vec::new());
            for &i in chunk {
                let (grid, _, constraint) = &data[i];
                let ex = draw_example(&grid.base(), conds[i].len(), gen.layers(), gen.masked.mask_token(), config.gen.cond_dropout, &mut rng);
                let cond = if ex.dropped { None } else { Some(conds[i][ex.caption].at_level(ex.level)?) };
                let pass = model.forward(&gen_cx, &cx, gen, cond.as_ref(), &ex.input, g.leaf(inputs[i].clone()));
                ce_terms.push(cross_entropy(&g, pass.logits, &ex.targets));
                if lambda != 0.0 {
                    let pos = soft_positions(&g, &rq_cx, rqvae, pass.logits, grid, &ex.targets);
                    ctl_terms.push(control_loss_var(&g, pos, constraint)?);
                }
            }
            let mean = |terms: Vec<Var>| {
                let n = terms.len() as f64;
                terms.into_iter().reduce(|a, b| g.add(a, b)).map(|s| g.scale(s, 1.0 / n))
            };
            let ce = mean(ce_terms).expect("nonempty batch");
            let ctl = mean(ctl_terms);
            let loss = ctl.map_or(ce, |c| g.add(ce, g.scale(c, lambda)));
            let value = g.item(loss);
            if !value.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            ce_sum += g.item(ce);
            ctl_sum += ctl.map_or(0.0, |c| g.item(c));
            let grads = g.backward(loss);
            let pg = cx.param_grads(&grads);
            drop((cx, gen_cx, rq_cx));
            opt.step(&mut model.store, &pg);
            total += value;
            batches += 1;
        }
        let n = batches as f64;
        let mut terms = BTreeMap::from([("ce".to_string(), ce_sum / n)]);
        if lambda != 0.0 {
            terms.insert("control".to_string(), ctl_sum / n);
        }
        log.push(epoch, total / n, terms);
    }
    model.store.snap_to_f32();
    if (gen.store.checksum(""), rqvae.store.checksum("")) != frozen {
        return Err(Error::FrozenWeightMutation);
    }
    Ok((model, log))
}

/// Text-to-motion steered by `constraint`. The output length is the
/// constraint length, and `frames` must agree with it. Metadata gains the
/// control metrics of the result when the constraint has active entries.
#[allow(clippy::too_many_arguments)]
pub fn controlled_generate(
    models: GenerationModels<'_>,
    control: &ControlModel,
    reasoner: &dyn ReasonerClient,
    text: &str,
    constraint: &TrajectoryConstraint,
    frames: usize,
    opts: &SamplingOptions,
    seed: u64,
) -> Result<GenerationOutput> {
    if frames != constraint.frames() {
        return Err(Error::Dim(format!("{frames} frames requested with a {}-frame constraint", constraint.frames())));
    }
    if control.downsample() != models.rqvae.config.downsample {
        return Err(Error::Dim(format!("control branch downsample {} ≠ {}", control.downsample(), models.rqvae.config.downsample)));
    }
    let steered = ControlledGenerator::new(models.generator.model(), control, constraint);
    let mut out = generate(GenerationModels { generator: &steered, ..models }, reasoner, text, frames, opts, seed)?;
    out.metadata.insert("control.active".into(), constraint.active_count().to_string());
    if constraint.active_count() > 0 {
        let threshold = control.config.eval.control_threshold;
        let r = constraint_metrics(std::slice::from_ref(&out.motion), std::slice::from_ref(constraint), threshold)?;
        out.metadata.insert("control.traj_err".into(), format!("{}", r.traj_err_50cm));
        out.metadata.insert("control.loc_err".into(), format!("{}", r.loc_err_50cm));
        out.metadata.insert("control.avg_err".into(), format!("{}", r.avg_err));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AlignConfig;
    use crate::data::{make_toy_corpus, ToyCorpusSpec};
    use crate::generation::TemplateReasoner;
    use crate::representation::{FeatureNormalizer, Vec3, FEATURE_DIM};

    fn tiny_config() -> PipelineConfig {
        let mut c = PipelineConfig::default();
        c.align = AlignConfig { latent_dim: 16, depth: 1, ..AlignConfig::default() };
        c.rqvae.codebook_size = 8;
        c.rqvae.hidden = 16;
        c.rqvae.code_dim = 8;
        c.gen.dim = 16;
        c.gen.depth = 2;
        c.gen.residual_depth = 1;
        c.gen.n1 = 3;
        c.gen.n2 = 2;
        c.gen.n3 = 2;
        c.control.epochs = 2;
        c
    }

    fn pelvis(frames: usize, at: &[(usize, Vec3)]) -> TrajectoryConstraint {
        let mut c = TrajectoryConstraint::empty(frames);
        for &(t, p) in at {
            c.set(t, 0, p).unwrap();
        }
        c
    }

    #[test]
    fn links_start_at_zero_and_copy_matches() {
        let cfg = tiny_config();
        let gen = GeneratorModel::new(&cfg).unwrap();
        let m = ControlModel::new(&cfg.control, &gen, 4).unwrap();
        assert!(m.links.iter().all(Option::is_some));
        for (_, name, v) in m.store.iter() {
            if name.starts_with("link") {
                assert!(v.data().iter().all(|&x| x == 0.0));
            }
        }
        assert_eq!(m.store.checksum("copy.").len(), 64);
        let mut first = cfg.control.clone();
        first.inject = "first".into();
        let m = ControlModel::new(&first, &gen, 4).unwrap();
        assert_eq!(m.links.iter().filter(|l| l.is_some()).count(), 1);
        first.inject = "some".into();
        assert!(ControlModel::new(&first, &gen, 4).is_err());
    }

    #[test]
    fn encoder_zero_fills_and_reacts_to_targets() {
        let cfg = tiny_config();
        let gen = GeneratorModel::new(&cfg).unwrap();
        let m = ControlModel::new(&cfg.control, &gen, 4).unwrap();
        let empty = TrajectoryConstraint::empty(10);
        let out = m.encode_trajectory(&empty);
        assert_eq!(out.shape(), (3, cfg.gen.dim));
        assert_eq!(out, m.encode_trajectory(&empty));
        let mut junk = empty.clone();
        junk.targets[4][7] = Vec3::new(5.0, 5.0, 5.0);
        assert_eq!(m.encode_trajectory(&junk), out);
        let a = pelvis(10, &[(0, Vec3::new(0.0, 0.9, 0.0)), (9, Vec3::new(1.0, 0.9, 0.0))]);
        let b = pelvis(10, &[(0, Vec3::new(1.0, 1.9, 1.0)), (9, Vec3::new(2.0, 1.9, 1.0))]);
        assert!(m.encode_trajectory(&a).max_abs_diff(&m.encode_trajectory(&b)) > 1e-6);
    }

    #[test]
    fn zero_init_branch_leaves_logits_bit_identical() {
        let cfg = tiny_config();
        let align = AlignmentModel::new(&cfg.align, FeatureNormalizer::identity(FEATURE_DIM), 0);
        let gen = GeneratorModel::new(&cfg).unwrap();
        let m = ControlModel::new(&cfg.control, &gen, 4).unwrap();
        let c = pelvis(12, &[(0, Vec3::new(0.3, 0.9, -0.2)), (11, Vec3::new(1.5, 0.9, 0.4))]);
        let steered = ControlledGenerator::new(&gen, &m, &c);
        let cond = ConditionTokens::from_caption(&align, "a person walks").unwrap();
        let tokens = [8, 2, 8];
        assert_eq!(steered.base_logits(Some(&cond), &tokens), gen.base_logits(Some(&cond), &tokens));
        assert_eq!(steered.base_logits(None, &tokens), gen.base_logits(None, &tokens));
    }

    #[test]
    fn training_keeps_frozen_weights_and_round_trips() {
        let mut cfg = tiny_config();
        let spec = ToyCorpusSpec { n_pairs: 3, min_frames: 12, max_frames: 16, ..ToyCorpusSpec::default() };
        let corpus = make_toy_corpus(&spec, 1).unwrap();
        let motions: Vec<_> = corpus.entries.iter().map(|e| e.motion.clone()).collect();
        cfg.rqvae.epochs = 2;
        let (rq, _) = crate::generation::train_rqvae(&motions, &cfg).unwrap();
        let align = AlignmentModel::new(&cfg.align, FeatureNormalizer::identity(FEATURE_DIM), 0);
        let gen = GeneratorModel::new(&cfg).unwrap();
        let data: Vec<ControlExample> = corpus
            .entries
            .iter()
            .map(|e| {
                let c = TrajectoryConstraint::from_motion(&e.motion, &[0], 4).unwrap();
                (rq.encode(&e.motion).unwrap(), e.annotation.clone(), c)
            })
            .collect();
        let before = gen.store.checksum("");
        let (a, la) = train_control(&data, &gen, &rq, &align, &cfg).unwrap();
        assert_eq!(gen.store.checksum(""), before);
        assert!(la.losses().iter().all(|l| l.is_finite()));
        assert!(la.epochs.last().unwrap().terms.contains_key("control"));
        let (b, _) = train_control(&data, &gen, &rq, &align, &cfg).unwrap();
        assert_eq!(a.store.checksum(""), b.store.checksum(""));
        let back = ControlModel::from_checkpoint(&Checkpoint::from_bytes(&a.to_checkpoint().to_bytes()).unwrap(), &gen).unwrap();
        assert_eq!(back.store.checksum(""), a.store.checksum(""));

        cfg.control.lambda_c = 0.0;
        let (_, l0) = train_control(&data, &gen, &rq, &align, &cfg).unwrap();
        assert!(!l0.epochs[0].terms.contains_key("control"));

        let mut bad = data.clone();
        bad[0].2 = TrajectoryConstraint::empty(bad[0].0.frames);
        assert!(matches!(train_control(&bad, &gen, &rq, &align, &cfg), Err(Error::EmptyMask)));

        let models = GenerationModels { align: &align, rqvae: &rq, generator: &gen };
        let opts = SamplingOptions::from_config(&cfg.gen).unwrap();
        let c = &data[0].2;
        let fresh = ControlModel::new(&cfg.control, &gen, 4).unwrap();
        let steered = controlled_generate(models, &fresh, &TemplateReasoner, "a person walks", c, c.frames(), &opts, 5).unwrap();
        let plain = generate(models, &TemplateReasoner, "a person walks", c.frames(), &opts, 5).unwrap();
        assert_eq!(steered.grid, plain.grid);
        assert_eq!(steered.motion, plain.motion);
        assert!(steered.metadata.contains_key("control.avg_err"));
        assert!(controlled_generate(models, &fresh, &TemplateReasoner, "a person walks", c, c.frames() + 1, &opts, 5).is_err());
    }
}
