use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::corpus::{Corpus, CorpusEntry, Split};
use crate::annotation::HierarchicalAnnotation;
use crate::control::TrajectoryConstraint;
use crate::error::{Error, Result};
use crate::representation::rotation::{axis_angle, to_6d, IDENTITY_6D};
use crate::representation::{GroupPair, JointSkeleton, KinematicGroup, MotionSequence, Rot6, RootState, Vec3, JOINT_COUNT};
use crate::rng::{substream, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ToyFamily {
    Wave,
    Walk,
    Squat,
    Turn,
    Still,
}

impl ToyFamily {
    pub const ALL: [ToyFamily; 5] = [ToyFamily::Wave, ToyFamily::Walk, ToyFamily::Squat, ToyFamily::Turn, ToyFamily::Still];

    pub fn name(self) -> &'static str {
        match self {
            ToyFamily::Wave => "wave",
            ToyFamily::Walk => "walk",
            ToyFamily::Squat => "squat",
            ToyFamily::Turn => "turn",
            ToyFamily::Still => "still",
        }
    }

    /// Number of distinct parameter combinations.
    pub fn variant_count(self) -> usize {
        variants(self).len()
    }
}

impl fmt::Display for ToyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ToyFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ToyFamily::ALL
            .into_iter()
            .find(|f| f.name() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown toy family {s:?}")))
    }
}

/// Parameters of a procedurally generated corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyCorpusSpec {
    pub n_pairs: usize,
    pub families: Vec<ToyFamily>,
    /// Target length range in frames; lengths are rounded down to whole
    /// cycles of a period divisible by 4.
    pub min_frames: usize,
    pub max_frames: usize,
    /// Amplitude in radians of the slow sway added to joints the family
    /// leaves at rest. The still family never sways.
    pub noise: f64,
    pub constraint_joints: Vec<usize>,
    pub constraint_stride: usize,
}

impl Default for ToyCorpusSpec {
    fn default() -> Self {
        Self {
            n_pairs: 64,
            families: ToyFamily::ALL.to_vec(),
            min_frames: 40,
            max_frames: 64,
            noise: 0.01,
            constraint_joints: vec![0],
            constraint_stride: 4,
        }
    }
}

impl ToyCorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("toy corpus: {m}")));
        if self.n_pairs == 0 {
            return bad("n_pairs must be at least 1");
        }
        if self.families.is_empty() {
            return bad("no motion families");
        }
        if self.min_frames < 8 || self.min_frames > self.max_frames {
            return bad("frame range must satisfy 8 ≤ min ≤ max");
        }
        if !(self.noise >= 0.0 && self.noise < 0.5) {
            return bad("noise must lie in [0, 0.5)");
        }
        if self.constraint_stride == 0 || self.constraint_joints.iter().any(|&j| j >= JOINT_COUNT) {
            return bad("invalid constraint joints or stride");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

impl Side {
    fn word(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }

    fn arm(self) -> KinematicGroup {
        match self {
            Side::Left => KinematicGroup::LeftArm,
            Side::Right => KinematicGroup::RightArm,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Variant {
    Wave { side: Side, cycles: usize, amplitude: usize },
    Walk { backward: bool, pace: usize, cycles: usize },
    Squat { depth: usize, reps: usize, quick: bool },
    Turn { side: Side, angle: usize, pace: usize },
    Still { pose: usize, head: usize },
}

/// Vertical swing of the waving arm's group mean, meters.
pub const WAVE_AMPLITUDES: [f64; 3] = [0.05, 0.09, 0.13];
const AMPLITUDE_WORDS: [&str; 3] = ["small", "medium", "large"];
const WALK_SPEEDS: [f64; 3] = [0.02, 0.035, 0.05];
const PACE_WORDS: [&str; 3] = ["slowly", "at a steady pace", "briskly"];
const SQUAT_DEPTHS: [f64; 3] = [0.5, 0.9, 1.3];
const DEPTH_WORDS: [&str; 3] = ["shallow", "half", "deep"];
const TURN_ANGLES: [f64; 3] = [PI / 2.0, PI, 2.0 * PI];
const TURN_WORDS: [&str; 3] = ["a quarter turn", "a half turn", "a full circle"];
const POSE_WORDS: [&str; 5] = ["in a t pose", "with arms hanging down", "with both arms raised overhead", "in a low crouch", "leaning the chest forward"];
const HEAD_WORDS: [&str; 3] = ["", "head bowed", "head tilted back"];

fn count_word(n: usize) -> &'static str {
    ["zero times", "once", "twice", "three times", "four times"][n.min(4)]
}

fn variants(family: ToyFamily) -> Vec<Variant> {
    let mut out = Vec::new();
    match family {
        ToyFamily::Wave => {
            for side in [Side::Left, Side::Right] {
                for cycles in 1..=3 {
                    for amplitude in 0..3 {
                        out.push(Variant::Wave { side, cycles, amplitude });
                    }
                }
            }
        }
        ToyFamily::Walk => {
            for backward in [false, true] {
                for pace in 0..3 {
                    for cycles in 2..=4 {
                        out.push(Variant::Walk { backward, pace, cycles });
                    }
                }
            }
        }
        ToyFamily::Squat => {
            for depth in 0..3 {
                for reps in 1..=3 {
                    for quick in [false, true] {
                        out.push(Variant::Squat { depth, reps, quick });
                    }
                }
            }
        }
        ToyFamily::Turn => {
            for side in [Side::Left, Side::Right] {
                for angle in 0..3 {
                    for pace in 0..3 {
                        out.push(Variant::Turn { side, angle, pace });
                    }
                }
            }
        }
        ToyFamily::Still => {
            for pose in 0..5 {
                for head in 0..3 {
                    out.push(Variant::Still { pose, head });
                }
            }
        }
    }
    out
}

fn period_frames(target: usize, cycles: usize) -> usize {
    ((target / cycles) / 4 * 4).max(8)
}

/// Mean distance of a group's joints beyond `pivot` along the rest-pose
/// bone direction, so rotating `pivot` by θ moves the group mean by `r̄ sin θ`.
fn lever_arm(skeleton: &JointSkeleton, group: KinematicGroup, pivot: usize) -> f64 {
    let rest = skeleton.rest_positions();
    let members = skeleton.members(group);
    let descends = |mut j: usize| {
        while let Some(p) = skeleton.parent[j] {
            if p == pivot {
                return true;
            }
            j = p;
        }
        false
    };
    members.iter().filter(|&&j| descends(j)).map(|&j| (rest[j] - rest[pivot]).norm()).sum::<f64>() / members.len() as f64
}

struct Built {
    rotations: Vec<[Rot6; JOINT_COUNT - 1]>,
    root: RootState,
    caption: Vec<String>,
    joint: BTreeMap<KinematicGroup, String>,
    inter: BTreeMap<GroupPair, String>,
    active: Vec<KinematicGroup>,
}

fn rot(axis: Vec3, angle: f64) -> Rot6 {
    to_6d(&axis_angle(axis, angle))
}

fn still_texts() -> (BTreeMap<KinematicGroup, String>, BTreeMap<GroupPair, String>) {
    let joint = KinematicGroup::ALL.iter().map(|&g| (g, format!("{} remains still", g.phrase()))).collect();
    let inter = GroupPair::all()
        .into_iter()
        .map(|p| (p, format!("{} and {} keep their distance", p.first.phrase(), p.second.phrase())))
        .collect();
    (joint, inter)
}

/// Sets the interaction text of every pair touching an active group.
fn describe_pairs(inter: &mut BTreeMap<GroupPair, String>, active: &[KinematicGroup], phrase: &str) {
    for (p, text) in inter.iter_mut() {
        if active.contains(&p.first) || active.contains(&p.second) {
            *text = format!("{} and {} {phrase}", p.first.phrase(), p.second.phrase());
        }
    }
}

fn squat_angles(r: &mut [Rot6; JOINT_COUNT - 1], phi: f64) {
    let x = Vec3::x();
    // Thighs forward, shins back twice as far, feet flat.
    for (hip, knee, ankle) in [(1, 4, 7), (2, 5, 8)] {
        r[hip - 1] = rot(x, -phi);
        r[knee - 1] = rot(x, 2.0 * phi);
        r[ankle - 1] = rot(x, -phi);
    }
}

fn squat_height(skeleton: &JointSkeleton, phi: f64) -> f64 {
    let thigh = skeleton.rest_offsets[4].norm();
    let shin = skeleton.rest_offsets[7].norm();
    skeleton.rest_pelvis_height() - (thigh + shin) * (1.0 - phi.cos())
}

fn build(variant: Variant, target_len: usize, skeleton: &JointSkeleton) -> Built {
    let (mut joint, mut inter) = still_texts();
    let rest_h = skeleton.rest_pelvis_height();
    let (x, z) = (Vec3::x(), Vec3::z());
    match variant {
        Variant::Wave { side, cycles, amplitude } => {
            let period = period_frames(target_len, cycles);
            let frames = period * cycles;
            let shoulder = if side == Side::Left { 16 } else { 17 };
            let amp = WAVE_AMPLITUDES[amplitude];
            let theta = (amp / lever_arm(skeleton, side.arm(), shoulder)).asin();
            // +z lifts the left arm (along +x) and lowers the right arm.
            let sign = if side == Side::Left { 1.0 } else { -1.0 };
            let rotations = (0..frames)
                .map(|t| {
                    let mut r = [IDENTITY_6D; JOINT_COUNT - 1];
                    r[shoulder - 1] = rot(z, sign * theta * (2.0 * PI * t as f64 / period as f64).sin());
                    r
                })
                .collect();
            let (s, c, a) = (side.word(), count_word(cycles), AMPLITUDE_WORDS[amplitude]);
            joint.insert(side.arm(), format!("the {s} arm swings up and down {c} with a {a} swing"));
            describe_pairs(&mut inter, &[side.arm()], &format!("move apart and back together {c}"));
            Built {
                rotations,
                root: RootState::still(frames, rest_h),
                caption: vec![
                    format!("a person waves the {s} arm up and down {c} with a {a} swing"),
                    format!("someone flaps their {s} hand {c}, {a} motion"),
                ],
                joint,
                inter,
                active: vec![side.arm()],
            }
        }
        Variant::Walk { backward, pace, cycles } => {
            let period = period_frames(target_len, cycles);
            let frames = period * cycles;
            let speed = WALK_SPEEDS[pace] * if backward { -1.0 } else { 1.0 };
            let rotations = (0..frames)
                .map(|t| {
                    let s = 2.0 * PI * t as f64 / period as f64;
                    let mut r = [IDENTITY_6D; JOINT_COUNT - 1];
                    for (hip, knee, phase) in [(1, 4, 0.0), (2, 5, PI)] {
                        r[hip - 1] = rot(x, -0.45 * (s + phase).sin());
                        r[knee - 1] = rot(x, 0.5 * (1.0 - (s + phase).cos()) * 0.5);
                    }
                    r
                })
                .collect();
            let mut root = RootState::still(frames, rest_h);
            root.linear_velocity = vec![[0.0, speed]; frames];
            let (d, p, c) = (if backward { "backward" } else { "forward" }, PACE_WORDS[pace], count_word(cycles));
            joint.insert(KinematicGroup::Torso, format!("the torso travels {d} {p}"));
            for leg in [KinematicGroup::LeftLeg, KinematicGroup::RightLeg] {
                joint.insert(leg, format!("{} steps {d} and back {c}", leg.phrase()));
            }
            let legs = [KinematicGroup::LeftLeg, KinematicGroup::RightLeg];
            describe_pairs(&mut inter, &legs, &format!("swing apart and together {c}"));
            Built {
                rotations,
                root,
                caption: vec![
                    format!("a person walks {d} {p} for {} strides", ["", "one", "two", "three", "four"][cycles]),
                    format!("someone takes {} {d} steps {p}", ["", "one", "two", "three", "four"][cycles * 2 % 5]),
                ],
                joint,
                inter,
                active: vec![KinematicGroup::Torso, KinematicGroup::LeftLeg, KinematicGroup::RightLeg],
            }
        }
        Variant::Squat { depth, reps, quick } => {
            let target = if quick { target_len * 2 / 3 } else { target_len };
            let period = period_frames(target, reps);
            let frames = period * reps;
            let big_phi = SQUAT_DEPTHS[depth];
            let mut root = RootState::still(frames, rest_h);
            let rotations = (0..frames)
                .map(|t| {
                    let phi = big_phi * 0.5 * (1.0 - (2.0 * PI * t as f64 / period as f64).cos());
                    root.height[t] = squat_height(skeleton, phi);
                    let mut r = [IDENTITY_6D; JOINT_COUNT - 1];
                    squat_angles(&mut r, phi);
                    r
                })
                .collect();
            let (d, c, q) = (DEPTH_WORDS[depth], count_word(reps), if quick { "quickly" } else { "slowly" });
            joint.insert(KinematicGroup::Torso, format!("the torso lowers and rises {c} {q}"));
            for leg in [KinematicGroup::LeftLeg, KinematicGroup::RightLeg] {
                joint.insert(leg, format!("{} bends into a {d} squat and straightens {c}", leg.phrase()));
            }
            let legs = [KinematicGroup::LeftLeg, KinematicGroup::RightLeg];
            describe_pairs(&mut inter, &legs, &format!("move closer together and apart {c}"));
            Built {
                rotations,
                root,
                caption: vec![
                    format!("a person does a {d} squat {c} {q}"),
                    format!("someone squats {q}, {d} depth, {c}"),
                ],
                joint,
                inter,
                active: vec![KinematicGroup::Torso, KinematicGroup::LeftLeg, KinematicGroup::RightLeg],
            }
        }
        Variant::Turn { side, angle, pace } => {
            let frames = ((target_len * [6, 5, 4][pace] / 6) / 4 * 4).max(8);
            let total = TURN_ANGLES[angle] * if side == Side::Left { 1.0 } else { -1.0 };
            let mut root = RootState::still(frames, rest_h);
            root.angular_velocity = vec![total / (frames - 1) as f64; frames];
            let steps = 2usize;
            let period = frames as f64 / steps as f64;
            let rotations = (0..frames)
                .map(|t| {
                    let s = 2.0 * PI * t as f64 / period;
                    let mut r = [IDENTITY_6D; JOINT_COUNT - 1];
                    r[0] = rot(x, -0.2 * s.sin().max(0.0));
                    r[1] = rot(x, -0.2 * (-s.sin()).max(0.0));
                    r
                })
                .collect();
            let (w, a, q) = (side.word(), TURN_WORDS[angle], ["slowly", "steadily", "quickly"][pace]);
            joint.insert(KinematicGroup::Torso, format!("the torso rotates toward the {w} by {a} {q}"));
            for leg in [KinematicGroup::LeftLeg, KinematicGroup::RightLeg] {
                joint.insert(leg, format!("{} shuffles in place", leg.phrase()));
            }
            describe_pairs(&mut inter, &[KinematicGroup::LeftLeg, KinematicGroup::RightLeg], "shift slightly while turning");
            Built {
                rotations,
                root,
                caption: vec![format!("a person turns {w} {q}, making {a}"), format!("someone spins to the {w}, {a}, {q}")],
                joint,
                inter,
                active: vec![KinematicGroup::Torso, KinematicGroup::LeftLeg, KinematicGroup::RightLeg],
            }
        }
        Variant::Still { pose, head } => {
            let frames = (target_len / 4 * 4).max(8);
            let mut r = [IDENTITY_6D; JOINT_COUNT - 1];
            let mut height = rest_h;
            match pose {
                1 => {
                    r[15] = rot(z, -1.3);
                    r[16] = rot(z, 1.3);
                }
                2 => {
                    r[15] = rot(z, 1.3);
                    r[16] = rot(z, -1.3);
                }
                3 => {
                    squat_angles(&mut r, 0.8);
                    height = squat_height(skeleton, 0.8);
                }
                4 => r[2] = rot(x, 0.4),
                _ => {}
            }
            match head {
                1 => r[11] = rot(x, 0.4),
                2 => r[11] = rot(x, -0.4),
                _ => {}
            }
            let h = HEAD_WORDS[head];
            let caption = if h.is_empty() {
                vec![format!("a person stands still {}", POSE_WORDS[pose]), format!("someone holds still {}", POSE_WORDS[pose])]
            } else {
                vec![
                    format!("a person stands still {}, {h}", POSE_WORDS[pose]),
                    format!("someone holds still {} with the {h}", POSE_WORDS[pose]),
                ]
            };
            Built { rotations: vec![r; frames], root: RootState::still(frames, height), caption, joint, inter, active: Vec::new() }
        }
    }
}

fn is_ancestor_or_self(skeleton: &JointSkeleton, a: usize, mut k: usize) -> bool {
    loop {
        if k == a {
            return true;
        }
        match skeleton.parent[k] {
            Some(p) => k = p,
            None => return false,
        }
    }
}

/// Slow per-joint sway on joints outside the active groups.
fn add_sway(built: &mut Built, skeleton: &JointSkeleton, noise: f64, rng: &mut Rng) {
    if noise == 0.0 || built.active.is_empty() && built.root.angular_velocity.iter().all(|&w| w == 0.0) {
        return;
    }
    let frames = built.rotations.len();
    for j in 1..JOINT_COUNT {
        let amp = noise * rng.random_range(0.5..1.0);
        let freq = rng.random_range(0.5..1.5);
        let phase = rng.random_range(0.0..2.0 * PI);
        let axis = [Vec3::x(), Vec3::y(), Vec3::z()][rng.random_range(0..3)];
        // Joints that carry an active group would distort its motion.
        let carries_active = (0..JOINT_COUNT).any(|k| built.active.contains(&skeleton.group_of[k]) && is_ancestor_or_self(skeleton, j, k));
        if carries_active {
            continue;
        }
        for (t, r) in built.rotations.iter_mut().enumerate() {
            let base = crate::representation::rotation::from_6d(&r[j - 1]).expect("valid 6D rotation");
            let s = (2.0 * PI * freq * t as f64 / frames as f64 + phase).sin();
            r[j - 1] = to_6d(&(base * axis_angle(axis, amp * s)));
        }
    }
}

/// Procedural corpus held in memory. Pair `i` uses family
/// `families[i % F]` and the next unused parameter combination of that
/// family in a seeded order; combinations repeat only when exhausted.
pub fn make_toy_corpus(spec: &ToyCorpusSpec, seed: u64) -> Result<Corpus> {
    spec.validate()?;
    let skeleton = JointSkeleton::smpl();
    let mut order_rng = substream(seed, "toy.order");
    let grids: BTreeMap<ToyFamily, Vec<Variant>> = spec
        .families
        .iter()
        .map(|&f| {
            let mut v = variants(f);
            v.shuffle(&mut order_rng);
            (f, v)
        })
        .collect();
    let mut used: BTreeMap<ToyFamily, usize> = BTreeMap::new();
    let mut rng = substream(seed, "toy.motion");
    let mut entries = Vec::with_capacity(spec.n_pairs);
    for i in 0..spec.n_pairs {
        let family = spec.families[i % spec.families.len()];
        let k = used.entry(family).or_default();
        let grid = &grids[&family];
        let variant = grid[*k % grid.len()];
        *k += 1;
        let target = rng.random_range(spec.min_frames..=spec.max_frames);
        let mut built = build(variant, target, &skeleton);
        add_sway(&mut built, &skeleton, spec.noise, &mut rng);
        let motion = MotionSequence::from_kinematics(&built.rotations, &built.root, &skeleton)?;
        let annotation = HierarchicalAnnotation::new(built.caption, built.joint, built.inter)?;
        let constraint = TrajectoryConstraint::from_motion(&motion, &spec.constraint_joints, spec.constraint_stride)?;
        entries.push(CorpusEntry {
            id: format!("toy_{i:04}_{family}"),
            motion,
            annotation,
            constraint: Some(constraint),
            split: Split::Train,
        });
    }
    let meta = BTreeMap::from([
        ("source".to_string(), "toy".to_string()),
        ("seed".to_string(), seed.to_string()),
        ("families".to_string(), spec.families.iter().map(|f| f.name()).collect::<Vec<_>>().join(",")),
        ("noise".to_string(), spec.noise.to_string()),
    ]);
    Ok(Corpus { entries, meta })
}

/// Generates the corpus and writes it to `dir`.
pub fn make_toy_data(spec: &ToyCorpusSpec, seed: u64, dir: &Path) -> Result<Corpus> {
    let corpus = make_toy_corpus(spec, seed)?;
    corpus.write(dir)?;
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{cosine, HashingEmbedder, TextEmbedder};
    use crate::representation::{decompose, GroupConnectivity};

    #[test]
    fn still_family_is_constant() {
        let spec = ToyCorpusSpec { n_pairs: 1, families: vec![ToyFamily::Still], ..ToyCorpusSpec::default() };
        let c = make_toy_corpus(&spec, 3).unwrap();
        let e = &c.entries[0];
        let f = e.motion.features();
        for t in 1..f.rows() {
            assert_eq!(f.row(t), f.row(0));
        }
        assert!(e.annotation.joint_texts.values().all(|t| t.ends_with("remains still")));
    }

    #[test]
    fn wave_amplitude_survives_decomposition() {
        let spec = ToyCorpusSpec { n_pairs: 4, families: vec![ToyFamily::Wave], ..ToyCorpusSpec::default() };
        let c = make_toy_corpus(&spec, 9).unwrap();
        let s = JointSkeleton::smpl();
        for e in &c.entries {
            let arm = if e.annotation.caption().contains("left") { KinematicGroup::LeftArm } else { KinematicGroup::RightArm };
            let word = e.annotation.caption().split_whitespace().find(|w| AMPLITUDE_WORDS.contains(w)).unwrap();
            let expected = WAVE_AMPLITUDES[AMPLITUDE_WORDS.iter().position(|a| *a == word).unwrap()];
            let d = decompose(&e.motion, &s, &GroupConnectivity::default()).unwrap();
            let ys: Vec<f64> = d.groups[&arm].position.iter().map(|p| p.y).collect();
            let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
            let measured = (hi - lo) / 2.0;
            assert!((measured - expected).abs() / expected < 0.05, "{}: {measured} vs {expected}", e.id);
        }
    }

    #[test]
    fn corpus_is_deterministic_and_round_trips() {
        let spec = ToyCorpusSpec { n_pairs: 6, ..ToyCorpusSpec::default() };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        make_toy_data(&spec, 7, a.path()).unwrap();
        make_toy_data(&spec, 7, b.path()).unwrap();
        for f in ["corpus.meta", "index.txt", "motions/toy_0003_turn.kmot", "annotations/toy_0000_wave.txt", "constraints/toy_0001_walk.traj"] {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
        }
        let back = Corpus::read(a.path()).unwrap();
        assert_eq!(back.len(), 6);
        assert_eq!(back.entries[2].annotation, make_toy_corpus(&spec, 7).unwrap().entries[2].annotation);
    }

    #[test]
    fn default_corpus_captions_are_distinct() {
        let c = make_toy_corpus(&ToyCorpusSpec::default(), 1).unwrap();
        let e = HashingEmbedder::default();
        let emb: Vec<Vec<f64>> = c.entries.iter().map(|x| e.embed(x.annotation.caption())).collect();
        for i in 0..emb.len() {
            for j in 0..i {
                assert!(cosine(&emb[i], &emb[j]) < 0.999, "{} / {}", c.entries[i].id, c.entries[j].id);
            }
        }
    }

    #[test]
    fn invalid_spec() {
        assert!(make_toy_corpus(&ToyCorpusSpec { n_pairs: 0, ..ToyCorpusSpec::default() }, 1).is_err());
        assert!(make_toy_corpus(&ToyCorpusSpec { families: vec![], ..ToyCorpusSpec::default() }, 1).is_err());
    }
}
