//! Minimal tensor, autodiff and layer toolkit backing every trainable model.

mod gradcheck;
mod graph;
mod layers;
mod trainlog;
mod optim;
mod params;
mod tensor;

pub use gradcheck::gradient_check;
pub use graph::{unfold_len, Gradients, Graph, Var};
pub use layers::{
    block_diagonal_mask, sinusoidal_positions, Attention, Conv1d, Embedding, FeedForward, LayerNorm, Linear,
    Transformer, TransformerBlock,
};
pub use trainlog::{EpochRecord, TrainingLog};
pub use optim::Adam;
pub use params::{Ctx, ParamId, ParamStore};
pub use tensor::{argmax, Tensor};

