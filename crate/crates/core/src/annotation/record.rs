use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::representation::{GroupPair, KinematicGroup};

/// Texts at three levels: whole-body captions, one text per group and one
/// per group pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HierarchicalAnnotation {
    pub global_texts: Vec<String>,
    pub joint_texts: BTreeMap<KinematicGroup, String>,
    pub interaction_texts: BTreeMap<GroupPair, String>,
}

impl HierarchicalAnnotation {
    /// Checks that every group and pair has a text and that at least one
    /// global caption exists.
    pub fn new(
        global_texts: Vec<String>,
        joint_texts: BTreeMap<KinematicGroup, String>,
        interaction_texts: BTreeMap<GroupPair, String>,
    ) -> Result<Self> {
        let a = Self { global_texts, joint_texts, interaction_texts };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::format("annotation", m));
        if self.global_texts.is_empty() {
            return bad("no global caption".into());
        }
        for g in KinematicGroup::ALL {
            if !self.joint_texts.contains_key(&g) {
                return bad(format!("missing joint text for {g}"));
            }
        }
        for p in GroupPair::all() {
            if !self.interaction_texts.contains_key(&p) {
                return bad(format!("missing interaction text for {p}"));
            }
        }
        let all = self.global_texts.iter().chain(self.joint_texts.values()).chain(self.interaction_texts.values());
        if all.into_iter().any(|t| t.trim().is_empty()) {
            return bad("empty text".into());
        }
        if self.joint_texts.len() != 6 || self.interaction_texts.len() != 15 {
            return bad("unexpected extra entries".into());
        }
        Ok(())
    }

    /// First global caption.
    pub fn caption(&self) -> &str {
        &self.global_texts[0]
    }

    /// Left/right swapped record matching a mirrored motion: group keys are
    /// exchanged and the words "left" and "right" are swapped in every text.
    pub fn mirrored(&self) -> Self {
        Self {
            global_texts: self.global_texts.iter().map(|t| swap_left_right(t)).collect(),
            joint_texts: self.joint_texts.iter().map(|(g, t)| (g.mirrored(), swap_left_right(t))).collect(),
            interaction_texts: self
                .interaction_texts
                .iter()
                .map(|(p, t)| (p.mirrored(), swap_left_right(t)))
                .collect(),
        }
    }

    /// Sectioned plain-text form, one text per line.
    pub fn to_text(&self) -> String {
        let mut out = String::from("[GLOBAL]\n");
        for t in &self.global_texts {
            let _ = writeln!(out, "{}", one_line(t));
        }
        for (g, t) in &self.joint_texts {
            let _ = writeln!(out, "[JOINT:{g}]\n{}", one_line(t));
        }
        for (p, t) in &self.interaction_texts {
            let _ = writeln!(out, "[INTER:{p}]\n{}", one_line(t));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        enum Section {
            None,
            Global,
            Joint(KinematicGroup),
            Inter(GroupPair),
        }
        let mut section = Section::None;
        let mut global = Vec::new();
        let mut joint = BTreeMap::new();
        let mut inter = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = if header == "GLOBAL" {
                    Section::Global
                } else if let Some(g) = header.strip_prefix("JOINT:") {
                    Section::Joint(g.parse()?)
                } else if let Some(p) = header.strip_prefix("INTER:") {
                    let (a, b) = p
                        .split_once(',')
                        .ok_or_else(|| Error::format("annotation", format!("line {}: bad pair {p:?}", n + 1)))?;
                    let (a, b): (KinematicGroup, KinematicGroup) = (a.parse()?, b.parse()?);
                    if a == b {
                        return Err(Error::format("annotation", format!("line {}: pair of identical groups", n + 1)));
                    }
                    Section::Inter(GroupPair::new(a, b))
                } else {
                    return Err(Error::format("annotation", format!("line {}: unknown section {header:?}", n + 1)));
                };
                continue;
            }
            let duplicate = |what: String| Error::format("annotation", format!("line {}: second text for {what}", n + 1));
            match section {
                Section::None => {
                    return Err(Error::format("annotation", format!("line {}: text before any section", n + 1)))
                }
                Section::Global => global.push(line.to_string()),
                Section::Joint(g) => {
                    if joint.insert(g, line.to_string()).is_some() {
                        return Err(duplicate(g.to_string()));
                    }
                }
                Section::Inter(p) => {
                    if inter.insert(p, line.to_string()).is_some() {
                        return Err(duplicate(p.to_string()));
                    }
                }
            }
        }
        Self::new(global, joint, inter)
    }
}

fn one_line(t: &str) -> String {
    t.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Swaps the words "left" and "right", keeping capitalization.
pub fn swap_left_right(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String| {
        let swapped = match word.to_ascii_lowercase().as_str() {
            "left" => Some("right"),
            "right" => Some("left"),
            _ => None,
        };
        match swapped {
            Some(s) if word.chars().next().is_some_and(|c| c.is_uppercase()) => {
                let mut c = s.chars();
                let first = c.next().unwrap().to_ascii_uppercase();
                out.push(first);
                out.push_str(c.as_str());
            }
            Some(s) => out.push_str(s),
            None => out.push_str(word),
        }
        word.clear();
    };
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            word.push(ch);
        } else {
            flush(&mut word, &mut out);
            out.push(ch);
        }
    }
    flush(&mut word, &mut out);
    out
}
