use kinmo::alignment::{train_alignment, AlignmentModel, TextLevel};
use kinmo::annotation::HashingEmbedder;
use kinmo::checkpoint::Checkpoint;
use kinmo::config::{PipelineConfig, Section};
use kinmo::control::{train_control, ControlExample, ControlModel, TrajectoryConstraint};
use kinmo::data::{make_toy_corpus, make_toy_data, Corpus, Split, ToyCorpusSpec};
use kinmo::formats::{parse_keypoints, read_motion, write_keypoints, write_motion};
use kinmo::generation::{
    edit_infill, generate, parse_frame_ranges, train_generator, train_rqvae, GenerationModels, GeneratorModel, ReasonerClient,
    RqVae, SamplingOptions, TemplateReasoner,
};
use kinmo::representation::local_to_global;
use kinmo::Error;

fn tiny() -> PipelineConfig {
    PipelineConfig::parse(
        "align.latent_dim=16\nalign.depth=1\nalign.epochs=3\n\
         rqvae.hidden=32\nrqvae.codebook_size=16\nrqvae.epochs=3\n\
         gen.dim=32\ngen.depth=1\ngen.residual_depth=1\ngen.epochs=2\ncontrol.epochs=2\n",
    )
    .unwrap()
}

fn reload(ck: &Checkpoint) -> Checkpoint {
    Checkpoint::from_bytes(&ck.to_bytes()).unwrap()
}

#[test]
fn corpus_survives_disk() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ToyCorpusSpec { n_pairs: 7, min_frames: 16, max_frames: 24, ..ToyCorpusSpec::default() };
    let written = make_toy_data(&spec, 4, dir.path()).unwrap();
    let read = Corpus::read(dir.path()).unwrap();
    assert_eq!(read.entries.len(), 7);
    for (a, b) in written.entries.iter().zip(&read.entries) {
        assert_eq!(a.id, b.id);
        assert_eq!(a.annotation, b.annotation);
        assert_eq!(a.split, b.split);
        assert_eq!(a.constraint.as_ref().map(|c| c.active_count()), b.constraint.as_ref().map(|c| c.active_count()));
        // Motions are stored as f32.
        assert!(a.motion.features().max_abs_diff(b.motion.features()) < 1e-5);
    }
    assert_eq!(make_toy_corpus(&spec, 4).unwrap().entries[3].annotation, written.entries[3].annotation);
}

#[test]
fn motion_and_keypoint_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = make_toy_corpus(&ToyCorpusSpec { n_pairs: 2, ..ToyCorpusSpec::default() }, 0).unwrap().entries[1].motion.clone();
    let path = dir.path().join("m.kmot");
    write_motion(&path, &m).unwrap();
    let back = read_motion(&path).unwrap();
    write_motion(&path, &back).unwrap();
    assert_eq!(read_motion(&path).unwrap(), back);
    let poses = local_to_global(&back);
    let frames = parse_keypoints(&write_keypoints(&poses)).unwrap();
    assert_eq!(frames.len(), back.frames());
    for (f, p) in frames.iter().zip(&poses) {
        for j in 0..22 {
            assert!((f.joints[j] - p[j]).norm() < 1e-5);
        }
    }
}

#[test]
fn trained_models_reload_exactly_and_reject_foreign_configs() {
    let config = tiny();
    let corpus = make_toy_corpus(&ToyCorpusSpec { n_pairs: 6, min_frames: 16, max_frames: 24, ..ToyCorpusSpec::default() }, 2)
        .unwrap();
    let pairs = corpus.pairs(Split::Train);
    let motions: Vec<_> = pairs.iter().map(|p| p.0.clone()).collect();

    let (align, _) = train_alignment(&pairs, &config, &HashingEmbedder::default()).unwrap();
    let ck = reload(&align.to_checkpoint(&config));
    ck.verify("align", &config, Section::Align).unwrap();
    let align2 = AlignmentModel::from_checkpoint(&ck).unwrap();
    assert_eq!(align.embed_motion(&motions[0]), align2.embed_motion(&motions[0]));
    assert_eq!(align.embed_text(&pairs[0].1, TextLevel::Interaction).unwrap(), align2.embed_text(&pairs[0].1, TextLevel::Interaction).unwrap());

    let mut other = config.clone();
    other.set("align.heads", "2").unwrap();
    assert!(matches!(ck.verify("align", &other, Section::Align), Err(Error::ConfigMismatch { .. })));
    assert!(ck.verify("gen", &config, Section::Align).is_err());

    let (rqvae, _) = train_rqvae(&motions, &config).unwrap();
    let rqvae2 = RqVae::from_checkpoint(&reload(&rqvae.to_checkpoint(&config))).unwrap();
    assert_eq!(rqvae.encode(&motions[1]).unwrap(), rqvae2.encode(&motions[1]).unwrap());

    let data: Vec<_> = motions.iter().zip(&pairs).map(|(m, p)| (rqvae.encode(m).unwrap(), p.1.clone())).collect();
    let (gen, _) = train_generator(&data, &align, &config).unwrap();
    let gen2 = GeneratorModel::from_checkpoint(&reload(&gen.to_checkpoint())).unwrap();
    assert_eq!(gen.store.checksum(""), gen2.store.checksum(""));

    let opts = SamplingOptions::from_config(&config.gen).unwrap();
    let a = generate(GenerationModels { align: &align, rqvae: &rqvae, generator: &gen }, &TemplateReasoner, "a person waves", 20, &opts, 3)
        .unwrap();
    let b = generate(GenerationModels { align: &align2, rqvae: &rqvae2, generator: &gen2 }, &TemplateReasoner, "a person waves", 20, &opts, 3)
        .unwrap();
    assert_eq!(a, b);

    let mask = parse_frame_ranges("4:12", 20).unwrap();
    let columns = a.grid.frame_mask_to_columns(&mask).unwrap();
    let ann = TemplateReasoner.expand("a person squats").unwrap();
    let edited = edit_infill(GenerationModels { align: &align, rqvae: &rqvae, generator: &gen }, &a.grid, &columns, &ann, &opts, 1).unwrap();
    for (k, &m) in columns.iter().enumerate() {
        if !m {
            assert_eq!(edited.tokens[k], a.grid.tokens[k]);
        }
    }

    let examples: Vec<ControlExample> = data
        .iter()
        .zip(&motions)
        .map(|((g, ann), m)| (g.clone(), ann.clone(), TrajectoryConstraint::from_motion(m, &[0], 4).unwrap()))
        .collect();
    let (control, _) = train_control(&examples, &gen, &rqvae, &align, &config).unwrap();
    let control2 = ControlModel::from_checkpoint(&reload(&control.to_checkpoint()), &gen).unwrap();
    assert_eq!(control.store.checksum(""), control2.store.checksum(""));
}
