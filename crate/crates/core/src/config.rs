//! Flat `key=value` pipeline configuration with per-section digests.
//!
//! Keys are `seed`, `device`, and `<section>.<name>` for the sections
//! `annotate`, `align`, `rqvae`, `gen`, `control` and `eval`. Unknown keys are
//! rejected. A checkpoint stores the text and SHA-256 digest of the section
//! it was trained under, and loading it under a different section fails.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::formats::parse_key_values;

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value.parse().map_err(|e| Error::Config(format!("{key}={value}: {e}")))
}

macro_rules! section {
    ($(#[$meta:meta])* $name:ident, $prefix:literal { $($(#[$fmeta:meta])* $field:ident : $ty:ty = $default:expr),* $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name {
            $($(#[$fmeta])* pub $field: $ty,)*
        }

        impl Default for $name {
            fn default() -> Self {
                Self { $($field: $default,)* }
            }
        }

        impl $name {
            pub const PREFIX: &'static str = $prefix;

            fn set(&mut self, key: &str, value: &str) -> Result<bool> {
                match key {
                    $(stringify!($field) => self.$field = parse_value(key, value)?,)*
                    _ => return Ok(false),
                }
                Ok(true)
            }

            /// `(full key, value)` in declaration order.
            pub fn entries(&self) -> Vec<(String, String)> {
                vec![$((format!("{}.{}", $prefix, stringify!($field)), self.$field.to_string()),)*]
            }
        }
    };
}

section!(
    /// Annotation pipeline.
    AnnotateConfig, "annotate" {
        keyframe_threshold: f64 = 0.9,
        /// `stub` or `remote`.
        annotator: String = "stub".into(),
        remote_endpoint: String = String::new(),
        retries: u32 = 3,
        embed_dim: usize = 256,
    }
);

section!(
    /// Text–motion alignment model and training.
    AlignConfig, "align" {
        latent_dim: usize = 32,
        depth: usize = 2,
        heads: usize = 4,
        vocab_buckets: usize = 1024,
        max_words: usize = 32,
        epochs: usize = 300,
        batch_size: usize = 64,
        lr: f64 = 2e-3,
        lambda_nce: f64 = 0.1,
        lambda_kl: f64 = 1e-5,
        lambda_e: f64 = 1e-5,
        lambda_r: f64 = 1.0,
        temperature: f64 = 0.1,
        /// Global-text similarity at or above which a negative is dropped.
        negative_filter: f64 = 0.8,
    }
);

section!(
    /// Residual-quantized motion tokenizer.
    RqVaeConfig, "rqvae" {
        layers: usize = 3,
        codebook_size: usize = 64,
        code_dim: usize = 32,
        downsample: usize = 4,
        hidden: usize = 64,
        epochs: usize = 800,
        batch_size: usize = 16,
        lr: f64 = 2e-3,
        commitment: f64 = 0.02,
    }
);

section!(
    /// Masked generator, sampling and editing.
    GenConfig, "gen" {
        dim: usize = 64,
        depth: usize = 3,
        heads: usize = 4,
        residual_depth: usize = 2,
        epochs: usize = 300,
        batch_size: usize = 16,
        lr: f64 = 2e-3,
        cond_dropout: f64 = 0.1,
        rho: f64 = 0.4,
        n1: usize = 10,
        n2: usize = 4,
        n3: usize = 4,
        guidance: f64 = 4.0,
        temperature: f64 = 1.0,
        /// Fraction of logits removed by the top-k filter before sampling.
        topk_filter: f64 = 0.9,
        /// Default conditioning level: `g`, `gj` or `gji`.
        level: String = "gji".into(),
    }
);

section!(
    /// Trajectory-control branch.
    ControlConfig, "control" {
        lambda_c: f64 = 1.0,
        epochs: usize = 300,
        lr: f64 = 2e-3,
        /// Inject control features after every generator block (`all`) or only the first (`first`).
        inject: String = "all".into(),
        /// Constraint generator used for toy data: `pelvis` or `random`.
        constraint_joints: String = "pelvis".into(),
        /// Constrained frame every `constraint_stride` frames.
        constraint_stride: usize = 4,
    }
);

section!(
    /// Metric parameters.
    EvalConfig, "eval" {
        retrieval_threshold: f64 = 0.8,
        dissimilar_n: usize = 100,
        batch_size: usize = 32,
        diversity_pairs: usize = 30,
        mm_repeats: usize = 10,
        control_threshold: f64 = 0.5,
    }
);

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub device: String,
    pub annotate: AnnotateConfig,
    pub align: AlignConfig,
    pub rqvae: RqVaeConfig,
    pub gen: GenConfig,
    pub control: ControlConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            device: "cpu".into(),
            annotate: AnnotateConfig::default(),
            align: AlignConfig::default(),
            rqvae: RqVaeConfig::default(),
            gen: GenConfig::default(),
            control: ControlConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

/// Which part of the configuration a digest covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Section {
    Annotate,
    Align,
    RqVae,
    Gen,
    Control,
    Eval,
}

impl PipelineConfig {
    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let known = match key.split_once('.') {
            None => match key {
                "seed" => {
                    self.seed = parse_value(key, value)?;
                    true
                }
                "device" => {
                    self.device = value.to_string();
                    true
                }
                _ => false,
            },
            Some((section, name)) => match section {
                AnnotateConfig::PREFIX => self.annotate.set(name, value)?,
                AlignConfig::PREFIX => self.align.set(name, value)?,
                RqVaeConfig::PREFIX => self.rqvae.set(name, value)?,
                GenConfig::PREFIX => self.gen.set(name, value)?,
                ControlConfig::PREFIX => self.control.set(name, value)?,
                EvalConfig::PREFIX => self.eval.set(name, value)?,
                _ => false,
            },
        };
        if known {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown key {key:?}")))
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (k, v) in parse_key_values(text, "config")? {
            config.set(&k, &v)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.annotate.keyframe_threshold) {
            return fail("annotate.keyframe_threshold must lie in (0, 1)");
        }
        if !matches!(self.annotate.annotator.as_str(), "stub" | "remote") {
            return fail("annotate.annotator must be stub or remote");
        }
        if self.align.temperature <= 0.0 {
            return fail("align.temperature must be positive");
        }
        let weights = [self.align.lambda_nce, self.align.lambda_kl, self.align.lambda_e, self.align.lambda_r];
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return fail("align loss weights must be nonnegative");
        }
        if self.align.latent_dim % self.align.heads != 0 || self.gen.dim % self.gen.heads != 0 {
            return fail("model width must be divisible by the head count");
        }
        if self.rqvae.downsample == 0 || !self.rqvae.downsample.is_power_of_two() {
            return fail("rqvae.downsample must be a power of two");
        }
        if self.rqvae.layers == 0 || self.rqvae.codebook_size < 2 {
            return fail("rqvae needs at least one layer and two codes");
        }
        if !(0.0..=1.0).contains(&self.gen.rho) || !(0.0..=1.0).contains(&self.gen.cond_dropout) {
            return fail("gen.rho and gen.cond_dropout must be fractions");
        }
        if !(0.0..1.0).contains(&self.gen.topk_filter) || self.gen.temperature <= 0.0 {
            return fail("gen.topk_filter must lie in [0, 1) and gen.temperature must be positive");
        }
        if self.gen.n1 == 0 {
            return fail("gen.n1 must be at least 1");
        }
        if !matches!(self.gen.level.as_str(), "g" | "gj" | "gji") {
            return fail("gen.level must be g, gj or gji");
        }
        if !matches!(self.control.inject.as_str(), "all" | "first") {
            return fail("control.inject must be all or first");
        }
        if !matches!(self.control.constraint_joints.as_str(), "pelvis" | "random") || self.control.constraint_stride == 0 {
            return fail("control.constraint_joints must be pelvis or random with a positive stride");
        }
        if self.eval.control_threshold <= 0.0 || self.eval.batch_size == 0 {
            return fail("eval thresholds and batch sizes must be positive");
        }
        Ok(())
    }

    /// Every key in a fixed order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut out = vec![("seed".to_string(), self.seed.to_string()), ("device".to_string(), self.device.clone())];
        out.extend(self.annotate.entries());
        out.extend(self.align.entries());
        out.extend(self.rqvae.entries());
        out.extend(self.gen.entries());
        out.extend(self.control.entries());
        out.extend(self.eval.entries());
        out
    }

    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// The seed plus one section, as `key=value` lines.
    pub fn section_text(&self, section: Section) -> String {
        let entries = match section {
            Section::Annotate => self.annotate.entries(),
            Section::Align => self.align.entries(),
            Section::RqVae => self.rqvae.entries(),
            Section::Gen => self.gen.entries(),
            Section::Control => self.control.entries(),
            Section::Eval => self.eval.entries(),
        };
        let mut text = format!("seed={}\n", self.seed);
        for (k, v) in entries {
            text.push_str(&format!("{k}={v}\n"));
        }
        text
    }

    pub fn digest(&self, section: Section) -> [u8; 32] {
        Sha256::digest(self.section_text(section).as_bytes()).into()
    }
}
