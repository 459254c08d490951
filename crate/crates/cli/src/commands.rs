use std::fs;
use std::path::{Path, PathBuf};

use kinmo::alignment::{train_alignment, AlignmentModel};
use kinmo::annotation::{
    annotate_sequence, AnnotationClients, AnnotatorClient, HashingEmbedder,
    RemoteAnnotator, RulePoseDescriber, StubAnnotator,
};
use kinmo::checkpoint::Checkpoint;
use kinmo::config::{PipelineConfig, Section};
use kinmo::control::{controlled_generate, parse_joint_list, train_control, ControlExample, ControlModel, TrajectoryConstraint};
use kinmo::data::{ingest_humanml3d, make_toy_data, mirror_augment, Corpus, CorpusEntry, Split, ToyCorpusSpec, ToyFamily};
use kinmo::eval::{control_suite, cosine_similarity, editing_suite, generation_suite, retrieval_suite};
use kinmo::formats::{meta_path, read_meta, read_motion, write_keypoints, write_meta, write_motion, Metadata};
use kinmo::generation::{
    edit_infill, generate, parse_frame_ranges, train_generator, train_rqvae, GenerationModels, GenerationOutput,
    GeneratorModel, ReasonerClient, RqVae, SamplingOptions, TemplateReasoner,
};
use kinmo::nn::TrainingLog;
use kinmo::representation::{local_to_global, GroupConnectivity, JointSkeleton, MotionSequence};
use kinmo::rng::seeded_permutation;
use kinmo::{Error, Result};

use crate::{checkpoint_path, resolve_config, Cli, Command, SplitArg, Suite};

pub(crate) enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome = std::result::Result<(), Failure>;

pub(crate) fn dispatch(cli: &Cli) -> Outcome {
    let config = resolve_config(&cli.global).map_err(|e| Failure::Usage(e.to_string()))?;
    let models = cli.global.models.as_path();
    match &cli.command {
        Command::Preprocess(a) => {
            let annotator = annotator(&config, a.endpoint.as_deref());
            let embedder = HashingEmbedder::new(config.annotate.embed_dim);
            let clients = AnnotationClients { embedder: &embedder, describer: &RulePoseDescriber, annotator: annotator.as_ref() };
            let mut corpus = ingest_humanml3d(&a.humanml, &clients, config.annotate.keyframe_threshold, config.seed)?;
            if a.mirror {
                corpus = mirror_augment(&corpus);
            }
            corpus.write(&a.out)?;
            log::info!("wrote {} entries", corpus.len());
        }
        Command::Annotate(a) => {
            let annotator = annotator(&config, a.endpoint.as_deref());
            let embedder = HashingEmbedder::new(config.annotate.embed_dim);
            let clients = AnnotationClients { embedder: &embedder, describer: &RulePoseDescriber, annotator: annotator.as_ref() };
            let mut corpus = Corpus::read(&a.data)?;
            let (skeleton, connectivity) = (JointSkeleton::smpl(), GroupConnectivity::default());
            for e in &mut corpus.entries {
                let captions = e.annotation.global_texts.clone();
                e.annotation = annotate_sequence(
                    &e.motion,
                    &captions,
                    &skeleton,
                    &connectivity,
                    &clients,
                    config.annotate.keyframe_threshold,
                )?;
            }
            corpus.write(&a.out)?;
            if let Some(path) = &a.audit {
                let lines: String = annotator
                    .audit_log()
                    .iter()
                    .map(|e| format!("{}\t{}\n", e.subject, e.response.replace('\n', " ")))
                    .collect();
                fs::write(path, lines)?;
            }
            log::info!("annotated {} entries", corpus.len());
        }
        Command::MakeToyData(a) => {
            let families = match &a.families {
                None => ToyFamily::ALL.to_vec(),
                Some(list) => list.split(',').map(str::parse).collect::<Result<_>>()?,
            };
            let spec = ToyCorpusSpec {
                n_pairs: a.n,
                families,
                min_frames: a.min_frames,
                max_frames: a.max_frames,
                noise: a.noise,
                constraint_joints: constraint_joints(&config)?,
                constraint_stride: config.control.constraint_stride,
            };
            let corpus = make_toy_data(&spec, config.seed, &a.out)?;
            log::info!("wrote {} toy pairs", corpus.len());
        }
        Command::TrainAlign(a) => {
            let corpus = Corpus::read(&a.data)?;
            let pairs = corpus.pairs(Split::Train);
            let embedder = HashingEmbedder::new(config.annotate.embed_dim);
            let (model, log) = train_alignment(&pairs, &config, &embedder)?;
            save(&model.to_checkpoint(&config), &log, &out_path(models, &a.out, "align"))?;
        }
        Command::TrainRqvae(a) => {
            let corpus = Corpus::read(&a.data)?;
            let motions: Vec<MotionSequence> = corpus.split(Split::Train).map(|e| e.motion.clone()).collect();
            let (model, log) = train_rqvae(&motions, &config)?;
            save(&model.to_checkpoint(&config), &log, &out_path(models, &a.out, "rqvae"))?;
        }
        Command::TrainGen(a) => {
            let corpus = Corpus::read(&a.data)?;
            let align = load_align(models, &config)?;
            let rqvae = load_rqvae(models, &config)?;
            let data = corpus
                .split(Split::Train)
                .map(|e| Ok((rqvae.encode(&e.motion)?, e.annotation.clone())))
                .collect::<Result<Vec<_>>>()?;
            let (model, log) = train_generator(&data, &align, &config)?;
            save(&model.to_checkpoint(), &log, &out_path(models, &a.out, "gen"))?;
        }
        Command::TrainControl(a) => {
            let corpus = Corpus::read(&a.data)?;
            let align = load_align(models, &config)?;
            let rqvae = load_rqvae(models, &config)?;
            let gen = load_gen(models, &config, &align, &rqvae)?;
            let joints = constraint_joints(&config)?;
            let data = corpus
                .split(Split::Train)
                .map(|e| {
                    let constraint = match &e.constraint {
                        Some(c) => c.clone(),
                        None => TrajectoryConstraint::from_motion(&e.motion, &joints, config.control.constraint_stride)?,
                    };
                    Ok((rqvae.encode(&e.motion)?, e.annotation.clone(), constraint))
                })
                .collect::<Result<Vec<ControlExample>>>()?;
            let (model, log) = train_control(&data, &gen, &rqvae, &align, &config)?;
            save(&model.to_checkpoint(), &log, &out_path(models, &a.out, "control"))?;
        }
        Command::Generate(a) => {
            let (align, rqvae, gen) = load_stack(models, &config)?;
            let opts = sampling(&config, a.level)?;
            let gm = GenerationModels { align: &align, rqvae: &rqvae, generator: &gen };
            let out = generate(gm, &TemplateReasoner, &a.text, a.length, &opts, config.seed)?;
            write_output(&a.out, &out.motion, &out.metadata)?;
        }
        Command::Edit(a) => {
            let source = read_motion(&a.input)?;
            let frame_mask = parse_frame_ranges(&a.mask, source.frames()).map_err(|e| Failure::Usage(e.to_string()))?;
            let (align, rqvae, gen) = load_stack(models, &config)?;
            let opts = sampling(&config, a.level)?;
            let grid = rqvae.encode(&source)?;
            let columns = grid.frame_mask_to_columns(&frame_mask)?;
            let annotation = TemplateReasoner.expand(&a.text)?;
            let gm = GenerationModels { align: &align, rqvae: &rqvae, generator: &gen };
            let edited = edit_infill(gm, &grid, &columns, &annotation, &opts, config.seed)?;
            let motion = rqvae.decode(&edited)?;
            let changed = grid.tokens.iter().zip(&edited.tokens).filter(|(a, b)| a != b).count();
            let meta = Metadata::from([
                ("text".to_string(), a.text.clone()),
                ("mask".to_string(), a.mask.clone()),
                ("source".to_string(), file_name(&a.input)),
                ("seed".to_string(), config.seed.to_string()),
                ("level".to_string(), opts.level.short().to_string()),
                ("frames".to_string(), motion.frames().to_string()),
                ("edited_columns".to_string(), columns.iter().filter(|&&m| m).count().to_string()),
                ("changed_columns".to_string(), changed.to_string()),
            ]);
            write_output(&a.out, &motion, &meta)?;
        }
        Command::ControlGenerate(a) => {
            let (align, rqvae, gen) = load_stack(models, &config)?;
            let control = load_control(models, &config, &gen)?;
            let opts = sampling(&config, a.level)?;
            let constraint = TrajectoryConstraint::read(&a.traj)?;
            let frames = a.length.unwrap_or(constraint.frames());
            let gm = GenerationModels { align: &align, rqvae: &rqvae, generator: &gen };
            let mut out: GenerationOutput =
                controlled_generate(gm, &control, &TemplateReasoner, &a.text, &constraint, frames, &opts, config.seed)?;
            out.metadata.insert("traj".into(), file_name(&a.traj));
            write_output(&a.out, &out.motion, &out.metadata)?;
        }
        Command::Retrieve(a) => {
            let align = load_align(models, &config)?;
            let corpus = Corpus::read(&a.data)?;
            let entries = select(&corpus, a.split);
            let scored: Vec<(f64, &CorpusEntry)> = if let Some(text) = &a.text {
                let q = align.embed_caption(text)?;
                entries.iter().map(|e| (cosine_similarity(&q, &align.embed_motion(&e.motion)), *e)).collect()
            } else {
                let path = a.motion.as_ref().expect("clap requires --text or --motion");
                let q = align.embed_motion(&read_motion(path)?);
                entries
                    .iter()
                    .map(|e| Ok((cosine_similarity(&q, &align.embed_caption(e.annotation.caption())?), *e)))
                    .collect::<Result<_>>()?
            };
            let mut order: Vec<usize> = (0..scored.len()).collect();
            order.sort_by(|&i, &j| scored[j].0.total_cmp(&scored[i].0).then(i.cmp(&j)));
            for (rank, &i) in order.iter().take(a.top).enumerate() {
                let (score, e) = scored[i];
                println!("{}\t{}\t{score:.6}\t{}", rank + 1, e.id, e.annotation.caption());
            }
        }
        Command::Eval(a) => {
            let corpus = Corpus::read(&a.reference)?;
            let refs = select(&corpus, a.split);
            let mut report = match a.suite {
                Suite::Retrieval => {
                    let align = load_align(models, &config)?;
                    let pairs: Vec<_> = refs.iter().map(|e| (e.motion.clone(), e.annotation.clone())).collect();
                    let embedder = HashingEmbedder::new(config.annotate.embed_dim);
                    retrieval_suite(&align, &pairs, &embedder, &config.eval, config.seed)?
                }
                Suite::Generation => {
                    let align = load_align(models, &config)?;
                    let pred = read_predictions(need_pred(a.pred.as_deref())?)?;
                    let generated: Vec<(MotionSequence, String)> =
                        pred.iter().map(|p| Ok((p.motion.clone(), p.text()?))).collect::<Result<_>>()?;
                    let reference: Vec<MotionSequence> = refs.iter().map(|e| e.motion.clone()).collect();
                    generation_suite(&align, &generated, &reference, &config.eval, config.seed)?
                }
                Suite::Control => {
                    let pred = read_predictions(need_pred(a.pred.as_deref())?)?;
                    let mut motions = Vec::new();
                    let mut constraints = Vec::new();
                    for p in &pred {
                        let entry = refs.iter().find(|e| e.id == p.id).ok_or_else(|| {
                            Error::InvalidArgument(format!("prediction {} has no reference entry of that id", p.id))
                        })?;
                        let c = entry.constraint.clone().ok_or_else(|| {
                            Error::InvalidArgument(format!("reference entry {} has no constraint", entry.id))
                        })?;
                        motions.push(p.motion.clone());
                        constraints.push(c);
                    }
                    control_suite(&motions, &constraints, &config.eval)?
                }
                Suite::Editing => {
                    let align = load_align(models, &config)?;
                    let pred = read_predictions(need_pred(a.pred.as_deref())?)?;
                    let edited: Vec<(MotionSequence, String)> =
                        pred.iter().map(|p| Ok((p.motion.clone(), p.text()?))).collect::<Result<_>>()?;
                    editing_suite(&align, &edited)?
                }
            };
            report.note("split", split_name(a.split));
            report.note("seed", config.seed.to_string());
            report.write(&a.report)?;
            for (k, v) in &report.metrics {
                log::info!("{k}={v}");
            }
        }
        Command::ExportAnim(a) => {
            let motion = read_motion(&a.input)?;
            fs::write(&a.out, write_keypoints(&local_to_global(&motion)))?;
            log::info!("wrote {} frames", motion.frames());
        }
    }
    Ok(())
}

fn annotator(config: &PipelineConfig, endpoint: Option<&str>) -> Box<dyn AnnotatorClient> {
    let endpoint = endpoint.map(str::to_string).or_else(|| {
        (config.annotate.annotator == "remote").then(|| config.annotate.remote_endpoint.clone())
    });
    match endpoint {
        Some(url) if !url.is_empty() => Box::new(RemoteAnnotator::new(url, config.annotate.retries)),
        _ => Box::new(StubAnnotator::new()),
    }
}

/// `pelvis`, `random` (one seeded joint) or an explicit joint list.
fn constraint_joints(config: &PipelineConfig) -> Result<Vec<usize>> {
    match config.control.constraint_joints.as_str() {
        "pelvis" => Ok(vec![0]),
        "random" => Ok(vec![seeded_permutation(kinmo::representation::JOINT_COUNT, config.seed)[0]]),
        list => parse_joint_list(list),
    }
}

fn out_path(models: &Path, out: &Option<PathBuf>, name: &str) -> PathBuf {
    out.clone().unwrap_or_else(|| checkpoint_path(models, name))
}

/// Writes the checkpoint and its loss history next to it as `<path>.log`.
fn save(ck: &Checkpoint, log: &TrainingLog, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    ck.save(path)?;
    let mut log_path = path.as_os_str().to_owned();
    log_path.push(".log");
    fs::write(PathBuf::from(log_path), log.to_text())?;
    log::info!("saved {}", path.display());
    Ok(())
}

/// Keys that only steer sampling; they may differ from training.
const SAMPLING_KEYS: [&str; 8] = ["rho", "n1", "n2", "n3", "guidance", "temperature", "topk_filter", "level"];

/// Loads a checkpoint and fails unless it was trained under the current
/// configuration. The seed and the sampling keys are exempt.
fn load_verified(path: &Path, tag: &str, config: &PipelineConfig, section: Section) -> Result<Checkpoint> {
    let ck = Checkpoint::load(path).map_err(|e| match e {
        Error::Io(io) => Error::InvalidArgument(format!("cannot read {}: {io}", path.display())),
        other => other,
    })?;
    let trained = ck.config()?;
    let mut expected = config.clone();
    expected.seed = trained.seed;
    if section == Section::Gen {
        let entries = trained.gen.entries();
        for key in SAMPLING_KEYS {
            let full = format!("gen.{key}");
            if let Some((_, v)) = entries.iter().find(|(k, _)| *k == full) {
                expected.set(&full, v)?;
            }
        }
    }
    ck.verify(tag, &expected, section).map_err(|e| match e {
        Error::ConfigMismatch { .. } => {
            Error::Config(format!("{} was trained under a different configuration ({e})", path.display()))
        }
        other => other,
    })?;
    Ok(ck)
}

fn load_align(models: &Path, config: &PipelineConfig) -> Result<AlignmentModel> {
    let ck = load_verified(&checkpoint_path(models, "align"), "align", config, Section::Align)?;
    AlignmentModel::from_checkpoint(&ck)
}

fn load_rqvae(models: &Path, config: &PipelineConfig) -> Result<RqVae> {
    let ck = load_verified(&checkpoint_path(models, "rqvae"), "rqvae", config, Section::RqVae)?;
    RqVae::from_checkpoint(&ck)
}

fn load_gen(models: &Path, config: &PipelineConfig, align: &AlignmentModel, rqvae: &RqVae) -> Result<GeneratorModel> {
    let ck = load_verified(&checkpoint_path(models, "gen"), "gen", config, Section::Gen)?;
    let gen = GeneratorModel::from_checkpoint(&ck)?;
    let built = (gen.config.align.latent_dim, gen.codes(), gen.layers());
    let current = (align.latent_dim(), rqvae.config.codebook_size, rqvae.config.layers);
    if built != current {
        return Err(Error::Config(format!(
            "generator expects (latent, codes, layers) = {built:?} but the loaded models give {current:?}"
        )));
    }
    Ok(gen)
}

fn load_control(models: &Path, config: &PipelineConfig, gen: &GeneratorModel) -> Result<ControlModel> {
    let ck = load_verified(&checkpoint_path(models, "control"), "control", config, Section::Control)?;
    ControlModel::from_checkpoint(&ck, gen)
}

fn load_stack(models: &Path, config: &PipelineConfig) -> Result<(AlignmentModel, RqVae, GeneratorModel)> {
    let align = load_align(models, config)?;
    let rqvae = load_rqvae(models, config)?;
    let gen = load_gen(models, config, &align, &rqvae)?;
    Ok((align, rqvae, gen))
}

fn sampling(config: &PipelineConfig, level: Option<crate::LevelArg>) -> Result<SamplingOptions> {
    let mut opts = SamplingOptions::from_config(&config.gen)?;
    if let Some(l) = level {
        opts.level = l.into();
    }
    Ok(opts)
}

fn write_output(path: &Path, motion: &MotionSequence, meta: &Metadata) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_motion(path, motion)?;
    write_meta(path, meta)?;
    log::info!("wrote {} ({} frames)", path.display(), motion.frames());
    Ok(())
}

fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned())
}

fn select(corpus: &Corpus, split: SplitArg) -> Vec<&CorpusEntry> {
    let want = match split {
        SplitArg::Train => Some(Split::Train),
        SplitArg::Val => Some(Split::Val),
        SplitArg::Test => Some(Split::Test),
        SplitArg::All => None,
    };
    corpus.entries.iter().filter(|e| want.is_none_or(|s| e.split == s)).collect()
}

fn split_name(split: SplitArg) -> &'static str {
    match split {
        SplitArg::Train => "train",
        SplitArg::Val => "val",
        SplitArg::Test => "test",
        SplitArg::All => "all",
    }
}

fn need_pred(pred: Option<&Path>) -> std::result::Result<&Path, Failure> {
    pred.ok_or_else(|| Failure::Usage("this suite needs --pred DIR".into()))
}

struct Prediction {
    id: String,
    motion: MotionSequence,
    meta: Metadata,
}

impl Prediction {
    fn text(&self) -> Result<String> {
        self.meta
            .get("text")
            .cloned()
            .ok_or_else(|| Error::InvalidArgument(format!("prediction {} has no text in its metadata", self.id)))
    }
}

/// Every `*.kmot` in `dir`, sorted by name, with its metadata sidecar if any.
fn read_predictions(dir: &Path) -> Result<Vec<Prediction>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "kmot"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InsufficientSamples(format!("no .kmot files in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let meta_file = meta_path(p);
            let meta = if meta_file.exists() { read_meta(p)? } else { Metadata::new() };
            let id = p.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
            Ok(Prediction { id, motion: read_motion(p)?, meta })
        })
        .collect()
}
