use std::collections::BTreeMap;

use crate::annotation::{tokenize, HierarchicalAnnotation};
use crate::error::{Error, Result};
use crate::representation::{GroupPair, KinematicGroup};

use KinematicGroup::*;

/// Expands a global action description into per-group and per-pair texts.
pub trait ReasonerClient: Send + Sync {
    fn expand(&self, global_text: &str) -> Result<HierarchicalAnnotation>;
}

/// Keyword rules; `{side}` is filled with the side named in the text.
struct Rule {
    keywords: &'static [&'static str],
    joint: &'static [(Role, &'static str)],
    pair: &'static str,
}

#[derive(Clone, Copy)]
enum Role {
    Torso,
    Neck,
    /// Arm on the named side (right when unnamed).
    Arm,
    BothArms,
    BothLegs,
}

const RULES: &[Rule] = &[
    Rule { keywords: &["wave", "waves", "waving", "flap", "flaps"], joint: &[(Role::Arm, "raises and swings up and down")], pair: "move apart and back together" },
    Rule { keywords: &["raise", "raises", "lift", "lifts"], joint: &[(Role::Arm, "raises overhead")], pair: "move apart" },
    Rule {
        keywords: &["walk", "walks", "walking", "step", "steps", "run", "runs", "jog"],
        joint: &[(Role::Torso, "travels forward"), (Role::BothLegs, "steps forward and back")],
        pair: "swing apart and together",
    },
    Rule {
        keywords: &["squat", "squats", "crouch", "crouches", "kneel"],
        joint: &[(Role::Torso, "lowers and rises"), (Role::BothLegs, "bends into a squat and straightens")],
        pair: "move closer together and apart",
    },
    Rule {
        keywords: &["turn", "turns", "spin", "spins", "rotate", "rotates"],
        joint: &[(Role::Torso, "rotates in place"), (Role::BothLegs, "shuffles in place")],
        pair: "shift slightly while turning",
    },
    Rule { keywords: &["jump", "jumps", "hop", "hops"], joint: &[(Role::BothLegs, "bends and pushes off the ground"), (Role::Torso, "rises and falls")], pair: "move together" },
    Rule { keywords: &["clap", "claps"], joint: &[(Role::BothArms, "raises and claps together")], pair: "meet and part" },
    Rule { keywords: &["nod", "nods", "bow", "bows"], joint: &[(Role::Neck, "tilts down and back up")], pair: "move together" },
    Rule { keywords: &["still", "stands", "stand", "holds"], joint: &[], pair: "keep their distance" },
];

const DEFAULT_JOINT: &str = "moves naturally";
const DEFAULT_PAIR: &str = "move naturally together";

/// Deterministic rule-table reasoner used when no language model is available.
#[derive(Clone, Copy, Debug, Default)]
pub struct TemplateReasoner;

impl ReasonerClient for TemplateReasoner {
    fn expand(&self, global_text: &str) -> Result<HierarchicalAnnotation> {
        let (joint, inter) = template_reasoner_stub(global_text)?;
        HierarchicalAnnotation::new(vec![global_text.trim().to_string()], joint, inter)
    }
}

/// Six group texts and fifteen pair texts from keyword rules; groups no rule
/// touches "move naturally" unless the text asks to stand still.
pub fn template_reasoner_stub(
    global_text: &str,
) -> Result<(BTreeMap<KinematicGroup, String>, BTreeMap<GroupPair, String>)> {
    let words = tokenize(global_text);
    if words.is_empty() {
        return Err(Error::Reasoner("cannot expand an empty description".into()));
    }
    let has = |w: &str| words.iter().any(|x| x == w);
    let arm = if has("left") && !has("right") { LeftArm } else { RightArm };
    let mut touched: BTreeMap<KinematicGroup, String> = BTreeMap::new();
    let mut pair_phrase: BTreeMap<KinematicGroup, &str> = BTreeMap::new();
    let mut still = false;
    for rule in RULES.iter().filter(|r| r.keywords.iter().any(|k| has(k))) {
        if rule.joint.is_empty() {
            still = true;
        }
        for &(role, phrase) in rule.joint {
            let groups: &[KinematicGroup] = match role {
                Role::Torso => &[Torso],
                Role::Neck => &[Neck],
                Role::Arm => std::slice::from_ref(&arm),
                Role::BothArms => &[LeftArm, RightArm],
                Role::BothLegs => &[LeftLeg, RightLeg],
            };
            for &g in groups {
                touched.entry(g).or_insert_with(|| format!("{} {phrase}", g.phrase()));
                pair_phrase.entry(g).or_insert(rule.pair);
            }
        }
    }
    let rest = if still && touched.is_empty() { "remains still" } else if still { "stays still" } else { DEFAULT_JOINT };
    let joint = KinematicGroup::ALL
        .iter()
        .map(|&g| (g, touched.get(&g).cloned().unwrap_or_else(|| format!("{} {rest}", g.phrase()))))
        .collect();
    let inter = GroupPair::all()
        .into_iter()
        .map(|p| {
            let phrase = match (pair_phrase.get(&p.first), pair_phrase.get(&p.second)) {
                (Some(a), _) | (None, Some(a)) => *a,
                (None, None) if still => "keep their distance",
                (None, None) => DEFAULT_PAIR,
            };
            (p, format!("{} and {} {phrase}", p.first.phrase(), p.second.phrase()))
        })
        .collect();
    Ok((joint, inter))
}
