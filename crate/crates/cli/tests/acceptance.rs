//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Run with `cargo test --test acceptance`.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use kinmo::alignment::{
    cross_attention_fuse_var, infonce, infonce_var, kl_regularizers_var, similarity_matrix, train_alignment,
    AlignmentModel, GaussianVar,
};
use kinmo::annotation::{select_keyframes, HashingEmbedder, HierarchicalAnnotation};
use kinmo::config::PipelineConfig;
use kinmo::control::{
    control_loss, control_loss_var, controlled_generate, local_to_global_var, train_control, ControlExample,
    ControlModel, TrajectoryConstraint,
};
use kinmo::data::{make_toy_corpus, Split, ToyCorpusSpec};
use kinmo::eval::{constraint_metrics, feature_statistics, fid, r_precision, retrieval_report, RetrievalProtocol};
use kinmo::generation::{
    edit_infill, generate, train_generator, train_rqvae, GenerationModels, GeneratorModel, MotionTokenGrid, RqVae,
    SamplingOptions, TemplateReasoner,
};
use kinmo::nn::{gradient_check, Graph, Tensor, Var};
use kinmo::representation::rotation::{axis_angle, to_6d};
use kinmo::representation::{
    decompose, pair_features, recompose, GroupConnectivity, JointSkeleton, KinematicGroup, MotionSequence, RootState,
    Rot6, Vec3,
};
use kinmo::Error;
use nalgebra::DMatrix;
use rand::Rng as _;

type Outcome = (bool, String);

fn rng(seed: u64) -> kinmo::rng::Rng {
    kinmo::rng::rng(seed)
}

fn uniform(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut r = rng(seed);
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect())
}

fn gaussian(rows: usize, cols: usize, seed: u64) -> Tensor {
    // Box-Muller.
    let mut r = rng(seed);
    let v = (0..rows * cols)
        .map(|_| {
            let (u1, u2): (f64, f64) = (r.random_range(f64::EPSILON..1.0), r.random());
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        })
        .collect();
    Tensor::from_vec(rows, cols, v)
}

// 1 -------------------------------------------------------------------------

fn random_motion(frames: usize, seed: u64, skeleton: &JointSkeleton) -> MotionSequence {
    let mut r = rng(seed);
    let rotations: Vec<[Rot6; 21]> = (0..frames)
        .map(|_| {
            std::array::from_fn(|_| {
                let axis = Vec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
                to_6d(&axis_angle(axis.normalize(), r.random_range(-1.2..1.2)))
            })
        })
        .collect();
    let mut root = RootState::still(frames, r.random_range(0.8..1.0));
    root.angular_velocity = (0..frames).map(|_| r.random_range(-0.05..0.05)).collect();
    root.linear_velocity = (0..frames).map(|_| [r.random_range(-0.03..0.03), r.random_range(-0.03..0.03)]).collect();
    MotionSequence::from_kinematics(&rotations, &root, skeleton).unwrap()
}

fn representation_round_trip() -> Outcome {
    let s = JointSkeleton::smpl();
    let conn = GroupConnectivity::default();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut antisymmetric = true;
    for seed in 0..100 {
        let m = random_motion(24, seed, &s);
        let d = decompose(&m, &s, &conn).unwrap();
        let back = recompose(&d.groups, &m.root_state(), &s).unwrap();
        worst = worst.max(back.features().max_abs_diff(m.features()));
        for (i, &a) in KinematicGroup::ALL.iter().enumerate() {
            for &b in &KinematicGroup::ALL[i + 1..] {
                let ab = pair_features(&d.groups, a, b, &conn).unwrap();
                let ba = pair_features(&d.groups, b, a, &conn).unwrap();
                antisymmetric &= ab.delta_position.iter().zip(&ba.delta_position).all(|(x, y)| *x == -*y);
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = worst < 1e-4 && antisymmetric && elapsed < Duration::from_secs(10);
    (ok, format!("max abs error {worst:.2e}, dP antisymmetric {antisymmetric}, {:.2}s", elapsed.as_secs_f64()))
}

// 2 -------------------------------------------------------------------------

fn infonce_values() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [2usize, 8, 64] {
        for tau in [0.07, 0.1, 1.0] {
            let s = Tensor::from_vec(n, n, vec![0.37; n * n]);
            worst = worst.max((infonce(&s, tau, None).unwrap() - (n as f64).ln()).abs());
        }
    }
    let identity = infonce(&Tensor::identity(2), 1.0, None).unwrap();
    let ok = worst <= 1e-9 && (identity - 0.31326).abs() <= 1e-5;
    (ok, format!("uniform max |L - ln N| {worst:.1e}; identity N=2 tau=1 gives {identity:.6}"))
}

// 3 -------------------------------------------------------------------------

fn gradient_checks() -> Outcome {
    let h = 1e-5;
    let s = uniform(5, 5, 7);
    let nce = gradient_check(&s, h, |g, x| infonce_var(g, x, 0.1, None).unwrap());
    let coarse = uniform(3, 8, 8);
    let low = uniform(4, 8, 9);
    let fuse = gradient_check(&low, h, |g, x| cross_attention_fuse_var(g, x, g.leaf(coarse.clone()), 8).unwrap())
        .max(gradient_check(&coarse, h, |g, x| cross_attention_fuse_var(g, g.leaf(low.clone()), x, 8).unwrap()));
    let mut x = uniform(8, 6, 10);
    for r in [2, 3, 6, 7] {
        for v in x.row_mut(r) {
            *v = v.abs() + 0.3;
        }
    }
    let kl = gradient_check(&x, h, |g: &Graph, x: Var| {
        let t = GaussianVar { mu: g.slice_rows(x, 0, 2), sigma: g.slice_rows(x, 2, 2) };
        let m = GaussianVar { mu: g.slice_rows(x, 4, 2), sigma: g.slice_rows(x, 6, 2) };
        kl_regularizers_var(g, t, m)
    });
    let walk = make_toy_corpus(&ToyCorpusSpec { n_pairs: 2, ..ToyCorpusSpec::default() }, 3).unwrap().entries[1].motion.clone();
    let feats = walk.features().slice_rows(0, 6);
    let short = MotionSequence::new(feats.clone()).unwrap();
    let mut c = TrajectoryConstraint::from_motion(&short, &[0, 15, 20], 2).unwrap();
    for row in &mut c.targets {
        for p in row.iter_mut() {
            *p += Vec3::new(0.05, -0.02, 0.1);
        }
    }
    let ctl = gradient_check(&feats, h, |g, v| control_loss_var(g, local_to_global_var(g, v), &c).unwrap());
    let worst = nce.max(fuse).max(kl).max(ctl);
    (worst < 1e-4, format!("relative errors infonce {nce:.1e}, fuse {fuse:.1e}, kl {kl:.1e}, control {ctl:.1e}"))
}

// 4 -------------------------------------------------------------------------

fn toy_alignment() -> Outcome {
    let corpus = make_toy_corpus(&ToyCorpusSpec::default(), 1).unwrap();
    let pairs = corpus.pairs(Split::Train);
    let config = PipelineConfig::default();
    let start = Instant::now();
    let (model, _) = train_alignment(&pairs, &config, &HashingEmbedder::new(config.annotate.embed_dim)).unwrap();
    let elapsed = start.elapsed();
    let texts: Vec<Vec<f64>> = pairs.iter().map(|(_, a)| model.embed_caption(a.caption()).unwrap()).collect();
    let motions: Vec<Vec<f64>> = pairs.iter().map(|(m, _)| model.embed_motion(m)).collect();
    let s = similarity_matrix(&Tensor::from_rows(&texts), &Tensor::from_rows(&motions)).unwrap();
    let [t2m, m2t] = retrieval_report(&s, RetrievalProtocol::All, None).unwrap();
    let ok = pairs.len() == 64
        && t2m.recall(1) >= 90.0
        && m2t.recall(1) >= 90.0
        && t2m.med_rank == 1.0
        && m2t.med_rank == 1.0
        && elapsed <= Duration::from_secs(20 * 60);
    let detail = format!(
        "{} pairs, R@1 t2m {:.1}% m2t {:.1}%, MedR {}/{}, trained in {:.0}s",
        pairs.len(),
        t2m.recall(1),
        m2t.recall(1),
        t2m.med_rank,
        m2t.med_rank,
        elapsed.as_secs_f64()
    );
    (ok, detail)
}

// 5-7 share one overfit stack on 8 sequences --------------------------------

struct Stack {
    config: PipelineConfig,
    pairs: Vec<(MotionSequence, HierarchicalAnnotation)>,
    align: AlignmentModel,
    rqvae: RqVae,
    grids: Vec<MotionTokenGrid>,
    gen: GeneratorModel,
}

impl Stack {
    fn build() -> Self {
        let config = PipelineConfig::default();
        let corpus = make_toy_corpus(&ToyCorpusSpec { n_pairs: 8, ..ToyCorpusSpec::default() }, 1).unwrap();
        let pairs: Vec<_> = corpus.entries.iter().map(|e| (e.motion.clone(), e.annotation.clone())).collect();
        let motions: Vec<MotionSequence> = pairs.iter().map(|p| p.0.clone()).collect();
        let (rqvae, _) = train_rqvae(&motions, &config).unwrap();
        let (align, _) = train_alignment(&pairs, &config, &HashingEmbedder::new(config.annotate.embed_dim)).unwrap();
        let grids: Vec<MotionTokenGrid> = motions.iter().map(|m| rqvae.encode(m).unwrap()).collect();
        let data: Vec<_> = grids.iter().cloned().zip(pairs.iter().map(|p| p.1.clone())).collect();
        let (gen, _) = train_generator(&data, &align, &config).unwrap();
        Self { config, pairs, align, rqvae, grids, gen }
    }

    fn models(&self) -> GenerationModels<'_> {
        GenerationModels { align: &self.align, rqvae: &self.rqvae, generator: &self.gen }
    }

    fn opts(&self) -> SamplingOptions {
        SamplingOptions::from_config(&self.config.gen).unwrap()
    }

    fn constraints(&self) -> Vec<TrajectoryConstraint> {
        let stride = self.config.control.constraint_stride;
        self.pairs.iter().map(|(m, _)| TrajectoryConstraint::from_motion(m, &[0], stride).unwrap()).collect()
    }
}

fn rqvae_reconstruction(stack: &Stack) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut monotone = true;
    for (m, _) in &stack.pairs {
        let errs: Vec<f64> = (1..=3).map(|q| stack.rqvae.reconstruction_mse(m, q).unwrap()).collect();
        monotone &= errs.windows(2).all(|w| w[1] <= w[0]);
        worst = worst.max(errs[2]);
    }
    let shape = (stack.config.rqvae.layers, stack.config.rqvae.codebook_size);
    let ok = worst < 0.01 && monotone && shape == (3, 64);
    (ok, format!("Q={} K={}, worst MSE {worst:.4}, non-increasing in layers on all 8: {monotone}", shape.0, shape.1))
}

fn editing(stack: &Stack) -> Outcome {
    let mut r = rng(11);
    let opts = stack.opts();
    let mut preserved = true;
    for i in 0..100 {
        let k = i % stack.grids.len();
        let grid = &stack.grids[k];
        let mask: Vec<bool> = (0..grid.len()).map(|_| r.random_bool(0.4)).collect();
        let out = edit_infill(stack.models(), grid, &mask, &stack.pairs[(k + 3) % 8].1, &opts, i as u64).unwrap();
        preserved &= out.len() == grid.len()
            && mask.iter().zip(grid.tokens.iter().zip(&out.tokens)).all(|(&m, (a, b))| m || a == b);
    }
    let identity = stack.grids.iter().enumerate().all(|(k, g)| {
        edit_infill(stack.models(), g, &vec![false; g.len()], &stack.pairs[k].1, &opts, 5).unwrap() == *g
    });
    (preserved && identity, format!("100 random masks preserve unmasked tokens: {preserved}; all-false mask is identity: {identity}"))
}

fn control(stack: &Stack) -> Outcome {
    let opts = stack.opts();
    let cons = stack.constraints();
    let r = stack.rqvae.config.downsample;

    // (a) zero-initialized branch.
    let zero = ControlModel::new(&stack.config.control, &stack.gen, r).unwrap();
    let identical = stack.pairs.iter().zip(&cons).enumerate().all(|(i, ((_, a), c))| {
        let plain = generate(stack.models(), &TemplateReasoner, a.caption(), c.frames(), &opts, i as u64).unwrap();
        let steered = controlled_generate(stack.models(), &zero, &TemplateReasoner, a.caption(), c, c.frames(), &opts, i as u64)
            .unwrap();
        plain.grid == steered.grid && plain.motion.features().data() == steered.motion.features().data()
    });

    // (b) trained branch.
    let data: Vec<ControlExample> =
        stack.grids.iter().zip(&stack.pairs).zip(&cons).map(|((g, (_, a)), c)| (g.clone(), a.clone(), c.clone())).collect();
    let (branch, _) = train_control(&data, &stack.gen, &stack.rqvae, &stack.align, &stack.config).unwrap();
    let steered: Vec<MotionSequence> = data
        .iter()
        .enumerate()
        .map(|(i, (_, a, c))| {
            controlled_generate(stack.models(), &branch, &TemplateReasoner, a.caption(), c, c.frames(), &opts, i as u64)
                .unwrap()
                .motion
        })
        .collect();
    let m = constraint_metrics(&steered, &cons, stack.config.eval.control_threshold).unwrap();

    // (c) empty mask.
    let motion = &stack.pairs[0].0;
    let empty_mask = vec![[false; 22]; motion.frames()];
    let empty_loss = matches!(control_loss(motion, motion, &empty_mask), Err(Error::EmptyMask));
    let empty_data: Vec<ControlExample> =
        vec![(stack.grids[0].clone(), stack.pairs[0].1.clone(), TrajectoryConstraint::empty(motion.frames()))];
    let empty_train =
        matches!(train_control(&empty_data, &stack.gen, &stack.rqvae, &stack.align, &stack.config), Err(Error::EmptyMask));

    let ok = identical && m.avg_err < 0.1 && m.traj_err_50cm == 0.0 && empty_loss && empty_train;
    let detail = format!(
        "(a) zero-init bit-identical {identical}; (b) avg err {:.4} m, traj err {}; (c) EmptyMask {}",
        m.avg_err,
        m.traj_err_50cm,
        empty_loss && empty_train
    );
    (ok, detail)
}

// 8 -------------------------------------------------------------------------

fn trace_sqrt_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    // Denman-Beavers iteration on the product.
    let m = a * b;
    let n = m.nrows();
    let (mut y, mut z) = (m.clone(), DMatrix::<f64>::identity(n, n));
    for _ in 0..100 {
        let yi = y.clone().try_inverse().unwrap();
        let zi = z.clone().try_inverse().unwrap();
        y = (&y + zi) * 0.5;
        z = (&z + yi) * 0.5;
    }
    y.trace()
}

fn oracle_fid(m1: &[f64], c1: &Tensor, m2: &[f64], c2: &Tensor) -> f64 {
    let mat = |t: &Tensor| DMatrix::from_row_slice(t.rows(), t.cols(), t.data());
    let (a, b) = (mat(c1), mat(c2));
    let mean: f64 = m1.iter().zip(m2).map(|(x, y)| (x - y).powi(2)).sum();
    mean + a.trace() + b.trace() - 2.0 * trace_sqrt_product(&a, &b)
}

fn brute_recalls(s: &Tensor) -> [(Vec<f64>, f64); 2] {
    let n = s.rows();
    let ranks = |score: &dyn Fn(usize, usize) -> f64| -> Vec<usize> {
        (0..n).map(|q| 1 + (0..n).filter(|&c| score(q, c) > score(q, q) || (score(q, c) == score(q, q) && c < q)).count()).collect()
    };
    let summarize = |r: Vec<usize>| {
        let recalls = [1, 2, 3, 5, 10].iter().map(|&k| 100.0 * r.iter().filter(|&&x| x <= k).count() as f64 / n as f64).collect();
        let mut v = r.clone();
        v.sort_unstable();
        let med = if n % 2 == 1 { v[n / 2] as f64 } else { (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0 };
        (recalls, med)
    };
    [summarize(ranks(&|q, c| s.get(q, c))), summarize(ranks(&|q, c| s.get(c, q)))]
}

fn metrics() -> Outcome {
    let mut fid_rel: f64 = 0.0;
    let mut self_fid: f64 = 0.0;
    for seed in 0..5 {
        let a = gaussian(300, 5, seed);
        let b = gaussian(300, 5, seed + 50).map(|v| 1.3 * v - 0.2);
        let (ma, ca) = feature_statistics(&a).unwrap();
        let (mb, cb) = feature_statistics(&b).unwrap();
        let want = oracle_fid(&ma, &ca, &mb, &cb);
        fid_rel = fid_rel.max((fid(&ma, &ca, &mb, &cb).unwrap() - want).abs() / want.abs());
        self_fid = self_fid.max(fid(&ma, &ca, &ma, &ca).unwrap());
    }
    let mut ranks_match = true;
    for seed in 0..20 {
        let s = uniform(10, 10, 100 + seed);
        let got = retrieval_report(&s, RetrievalProtocol::All, None).unwrap();
        for (rep, (recalls, med)) in got.iter().zip(brute_recalls(&s)) {
            ranks_match &= rep.recall_at.values().copied().collect::<Vec<_>>() == recalls && rep.med_rank == med;
        }
    }
    let text = gaussian(32 * 1000, 8, 7);
    let motion = gaussian(32 * 1000, 8, 8);
    let rp = r_precision(&text, &motion, 32, 0).unwrap();
    let ok = fid_rel <= 1e-6 && self_fid <= 1e-8 && ranks_match && (rp.top1 - 1.0 / 32.0).abs() <= 0.01;
    let detail = format!(
        "fid rel err {fid_rel:.1e}, fid(a,a) {self_fid:.1e}, ranks match brute force {ranks_match}, random top1 {:.4}",
        rp.top1
    );
    (ok, detail)
}

// 9 -------------------------------------------------------------------------

const TINY_CONFIG: &str = "\
align.latent_dim=16
align.depth=1
align.epochs=4
rqvae.hidden=32
rqvae.codebook_size=16
rqvae.epochs=4
gen.dim=32
gen.depth=1
gen.residual_depth=1
gen.epochs=3
eval.batch_size=4
eval.dissimilar_n=4
eval.diversity_pairs=2
";

fn pipeline(root: &Path) -> Vec<(String, Vec<u8>)> {
    let cfg = root.join("tiny.cfg");
    fs::write(&cfg, TINY_CONFIG).unwrap();
    let run = |args: &[&str]| {
        let mut full = vec!["kinmo", "--quiet", "--seed", "5", "--config", cfg.to_str().unwrap()];
        let models = root.join("models");
        full.extend(["--models", models.to_str().unwrap()]);
        full.extend_from_slice(args);
        assert_eq!(kinmo_cli::run(full.iter().copied()), 0, "kinmo {args:?} failed");
    };
    let p = |rel: &str| root.join(rel).to_str().unwrap().to_string();
    run(&["make-toy-data", "--n", "10", "--min-frames", "16", "--max-frames", "24", "--out", &p("data")]);
    run(&["train-align", "--data", &p("data")]);
    run(&["train-rqvae", "--data", &p("data")]);
    run(&["train-gen", "--data", &p("data")]);
    run(&["generate", "--text", "a person waves the right hand", "--length", "20", "--out", &p("pred/a.kmot")]);
    run(&["generate", "--text", "a person squats down", "--length", "20", "--out", &p("pred/b.kmot")]);
    run(&["eval", "--suite", "generation", "--pred", &p("pred"), "--ref", &p("data"), "--report", &p("gen.json")]);
    run(&["eval", "--suite", "retrieval", "--ref", &p("data"), "--report", &p("ret.json")]);
    ["models/align.ckpt", "models/rqvae.ckpt", "models/gen.ckpt", "pred/a.kmot", "pred/b.kmot", "gen.json", "ret.json"]
        .iter()
        .map(|rel| (rel.to_string(), fs::read(root.join(rel)).unwrap()))
        .collect()
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = pipeline(a.path());
    let second = pipeline(b.path());
    let differing: Vec<&str> = first.iter().zip(&second).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0.as_str()).collect();
    (differing.is_empty(), format!("{} artifacts compared, differing: {differing:?}", first.len()))
}

// 10 ------------------------------------------------------------------------

fn keyframes() -> Outcome {
    let unit = |v: &[f64]| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / n).collect::<Vec<f64>>()
    };
    let (a, b, c) = (unit(&[1.0, 0.0, 0.0]), unit(&[0.0, 1.0, 0.0]), unit(&[0.0, 0.0, 1.0]));
    let near_a = unit(&[1.0, 0.1, 0.0]);
    let cases: Vec<(Vec<Vec<f64>>, Vec<usize>)> = vec![
        (vec![a.clone(), a.clone(), near_a.clone(), b.clone(), c.clone(), c.clone()], vec![0, 3, 4]),
        (vec![a.clone(); 5], vec![0]),
        (vec![a.clone(), b.clone(), a.clone(), b.clone()], vec![0, 1, 2, 3]),
        (vec![a.clone()], vec![0]),
        // Compared against the last keyframe, not the previous frame: the drift
        // from `a` accumulates until it crosses the threshold.
        (vec![a.clone(), near_a.clone(), unit(&[1.0, 0.5, 0.0]), unit(&[1.0, 0.6, 0.0])], vec![0, 2]),
    ];
    let mut failures = Vec::new();
    for (i, (e, want)) in cases.iter().enumerate() {
        let got = select_keyframes(e, 0.9).unwrap().indices;
        if &got != want {
            failures.push(format!("case {i}: {got:?} != {want:?}"));
        }
    }
    (failures.is_empty(), if failures.is_empty() { format!("{} hand cases exact", cases.len()) } else { failures.join("; ") })
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("KINMO_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |n: usize| only.as_ref().is_none_or(|o| o.contains(&n));
    let mut stack: Option<Stack> = None;
    let mut results: Vec<(usize, &str, bool, String)> = Vec::new();
    let mut check = |n: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        if !wanted(n) {
            return;
        }
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(|| f())) {
            Ok(r) => r,
            Err(p) => (false, format!("panicked: {}", p.downcast_ref::<String>().cloned().unwrap_or_else(|| {
                p.downcast_ref::<&str>().map_or_else(|| "unknown".into(), |s| s.to_string())
            }))),
        };
        println!("criterion {n:>2} {:<26} {}  {detail}", name, if ok { "PASS" } else { "FAIL" });
        results.push((n, name, ok, detail));
    };
    check(1, "representation round trip", &mut representation_round_trip);
    check(2, "infonce values", &mut infonce_values);
    check(3, "gradient checks", &mut gradient_checks);
    check(4, "toy alignment", &mut toy_alignment);
    let mut with_stack = |n: usize, name: &'static str, f: fn(&Stack) -> Outcome| {
        check(n, name, &mut || f(stack.get_or_insert_with(Stack::build)));
    };
    with_stack(5, "rq-vae reconstruction", rqvae_reconstruction);
    with_stack(6, "editing preservation", editing);
    with_stack(7, "trajectory control", control);
    drop(with_stack);
    check(8, "metrics", &mut metrics);
    check(9, "determinism", &mut determinism);
    check(10, "keyframes", &mut keyframes);
    let failed: Vec<usize> = results.iter().filter(|r| !r.2).map(|r| r.0).collect();
    println!("acceptance: {} passed, {} failed", results.len() - failed.len(), failed.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
