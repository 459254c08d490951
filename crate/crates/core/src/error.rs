use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid motion: {0}")]
    InvalidMotion(String),

    #[error("degenerate 6D rotation ({0})")]
    DegenerateRotation(String),

    #[error("incomplete decomposition: {0}")]
    IncompleteDecomposition(String),

    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),

    #[error("invalid window {t0}..{t1} for a {frames}-frame motion")]
    InvalidWindow { t0: usize, t1: usize, frames: usize },

    #[error("annotation backend failed after {retries} retries: {message}")]
    AnnotationBackend { message: String, retries: u32 },

    #[error("cross-attention context is empty")]
    EmptyContext,

    #[error("dimension mismatch: {0}")]
    Dim(String),

    #[error("zero-norm embedding in row {0}")]
    ZeroNormEmbedding(usize),

    #[error("temperature must be positive, got {0}")]
    InvalidTemperature(f64),

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    TrainingDiverged { epoch: usize },

    #[error("unknown level {0:?}")]
    InvalidLevel(String),

    #[error("{0} is not fitted")]
    NotFitted(String),

    #[error("control mask has no active entries")]
    EmptyMask,

    #[error("frozen generator weights changed during control training")]
    FrozenWeightMutation,

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("ingest failed for {}: {message}", path.display())]
    Ingest { path: PathBuf, message: String },

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("checkpoint was written under config digest {found}, expected {expected}")]
    ConfigMismatch { expected: String, found: String },

    #[error("not enough samples: {0}")]
    InsufficientSamples(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("reasoner failed: {0}")]
    Reasoner(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(what: &'static str, message: impl Into<String>) -> Self {
        Error::Format { what, message: message.into() }
    }
}
