//! The `kinmo` command line: corpus preparation, training, generation,
//! editing, trajectory control, retrieval, evaluation and export.
//!
//! [`run`] parses arguments and returns the process exit status: 0 on
//! success, 2 for usage errors and 1 for runtime failures.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use kinmo::alignment::TextLevel;
use kinmo::config::PipelineConfig;

mod commands;

#[derive(Debug, Parser)]
#[command(name = "kinmo", version, about = "Kinematic-group text-to-motion toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Configuration file of `key=value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Overrides one configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Seed for every random step; defaults to the config `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory holding align.ckpt, rqvae.ckpt, gen.ckpt and control.ckpt.
    #[arg(long, global = true, value_name = "DIR", default_value = "models")]
    pub models: PathBuf,
    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest a HumanML3D-layout directory into a corpus.
    Preprocess(PreprocessArgs),
    /// Rebuild the joint and interaction texts of a corpus.
    Annotate(AnnotateArgs),
    /// Write a procedural toy corpus.
    MakeToyData(ToyArgs),
    /// Train the hierarchical text-motion alignment model.
    TrainAlign(TrainArgs),
    /// Train the residual-quantized motion tokenizer.
    TrainRqvae(TrainArgs),
    /// Train the masked and residual token generators.
    TrainGen(TrainArgs),
    /// Train the trajectory control branch.
    TrainControl(TrainArgs),
    /// Generate a motion from text.
    Generate(GenerateArgs),
    /// Regenerate frame ranges of a motion under new text.
    Edit(EditArgs),
    /// Generate a motion that follows joint trajectory targets.
    ControlGenerate(ControlGenerateArgs),
    /// Rank corpus motions for a text, or corpus captions for a motion.
    Retrieve(RetrieveArgs),
    /// Compute a metric suite and write a JSON report.
    Eval(EvalArgs),
    /// Write global joint positions as text keypoint frames.
    ExportAnim(ExportArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// HumanML3D-layout directory (`new_joint_vecs/`, `texts/`, split lists).
    #[arg(long, value_name = "DIR")]
    pub humanml: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Append a left/right mirrored copy of every entry.
    #[arg(long)]
    pub mirror: bool,
    /// HTTP annotator endpoint; the built-in rule annotator otherwise.
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[arg(long, value_name = "DIR", default_value = "data")]
    pub data: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,
    /// Write the annotator log, one `subject<TAB>response` line per call.
    #[arg(long, value_name = "FILE")]
    pub audit: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ToyArgs {
    /// Number of motion-text pairs.
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, value_name = "DIR", default_value = "data")]
    pub out: PathBuf,
    /// Comma-separated subset of wave, walk, squat, turn, still.
    #[arg(long)]
    pub families: Option<String>,
    #[arg(long, default_value_t = 40)]
    pub min_frames: usize,
    #[arg(long, default_value_t = 64)]
    pub max_frames: usize,
    /// Sway amplitude in radians on joints a family leaves at rest.
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus directory; the train split is used.
    #[arg(long, value_name = "DIR", default_value = "data")]
    pub data: PathBuf,
    /// Checkpoint path; defaults to the standard name under `--models`.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LevelArg {
    G,
    Gj,
    Gji,
}

impl From<LevelArg> for TextLevel {
    fn from(l: LevelArg) -> Self {
        match l {
            LevelArg::G => TextLevel::Global,
            LevelArg::Gj => TextLevel::Joint,
            LevelArg::Gji => TextLevel::Interaction,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub text: String,
    /// Frames to generate.
    #[arg(long, default_value_t = 60)]
    pub length: usize,
    /// Finest conditioning level; defaults to `gen.level`.
    #[arg(long, value_enum)]
    pub level: Option<LevelArg>,
    /// Output KMOT file; metadata goes to `FILE.meta`.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EditArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Frame ranges to regenerate, `a:b,c:d` (half-open).
    #[arg(long, value_name = "SPEC")]
    pub mask: String,
    #[arg(long)]
    pub text: String,
    #[arg(long, value_enum)]
    pub level: Option<LevelArg>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ControlGenerateArgs {
    #[arg(long)]
    pub text: String,
    /// Constraint file of `frame joint x y z` lines.
    #[arg(long, value_name = "FILE")]
    pub traj: PathBuf,
    /// Frames to generate; must equal the constraint length when given.
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long, value_enum)]
    pub level: Option<LevelArg>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    #[arg(long, value_name = "DIR", default_value = "data")]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub split: SplitArg,
    /// Text query; ranks corpus motions.
    #[arg(long, conflicts_with = "motion", required_unless_present = "motion")]
    pub text: Option<String>,
    /// KMOT query; ranks corpus captions.
    #[arg(long, value_name = "FILE")]
    pub motion: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub top: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Retrieval,
    Generation,
    Control,
    Editing,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// Directory of KMOT files to score; not used by the retrieval suite.
    #[arg(long, value_name = "DIR")]
    pub pred: Option<PathBuf>,
    /// Reference corpus directory.
    #[arg(long = "ref", value_name = "DIR")]
    pub reference: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub split: SplitArg,
    #[arg(long, value_name = "FILE")]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

/// Base configuration, then `--config`, then `--set` overrides, then `--seed`.
pub fn resolve_config(global: &Global) -> kinmo::Result<PipelineConfig> {
    let mut config = match &global.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    for kv in &global.overrides {
        let (k, v) = kv.split_once('=').ok_or_else(|| kinmo::Error::Config(format!("override {kv:?} is not KEY=VALUE")))?;
        config.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn init_logging(quiet: bool) {
    let level = if quiet { log::LevelFilter::Warn } else { log::LevelFilter::Info };
    // Tests call `run` repeatedly; only the first logger installs.
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format(|buf, record| writeln!(buf, "{}", record.args()))
        .try_init();
    log::set_max_level(level);
}

/// Runs one command line and returns its exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    init_logging(cli.global.quiet);
    match commands::dispatch(&cli) {
        Ok(()) => 0,
        Err(commands::Failure::Usage(msg)) => {
            let _ = Cli::command().error(ErrorKind::InvalidValue, msg).print();
            2
        }
        Err(commands::Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Standard checkpoint file under a models directory.
pub fn checkpoint_path(models: &Path, name: &str) -> PathBuf {
    models.join(format!("{name}.ckpt"))
}
