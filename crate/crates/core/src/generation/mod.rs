//! Motion tokenizer, masked token generators, sampling and editing.

pub mod generator;
pub mod reasoner;
pub mod rqvae;
pub mod sample;
pub mod schedule;

pub use generator::{
    guided_logits, masked_token_accuracy, train_generator, ConditionTokens, GeneratorModel, GeneratorPass, MaskedGenerator,
    ResidualGenerator,
};
pub use reasoner::{template_reasoner_stub, ReasonerClient, TemplateReasoner};
pub use rqvae::{nearest_code, train_rqvae, MotionTokenGrid, ResidualCodebooks, RqVae};
pub use sample::{
    edit_infill, generate, generate_from_annotation, infill_tokens, parse_frame_ranges, sample_code, stage_conditions,
    GenerationModels, GenerationOutput, LogitSource, SamplingOptions,
};
pub use schedule::{mask_schedule, masked_after};
