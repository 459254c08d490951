//! Hierarchical text encoders, the motion encoder/decoder and contrastive
//! training that places both modalities in one latent space.

pub mod losses;
pub mod model;
pub mod train;

pub use losses::{
    cross_attention_fuse, cross_attention_fuse_var, embedding_similarity_loss, gaussian_kl_var, infonce, infonce_var,
    kl_regularizers, kl_regularizers_var, reconstruction_loss, similarity_matrix, similarity_var, smooth_l1_var,
    standard_kl, standard_kl_var, GaussianVar,
};
pub use model::{progressive_fuse, AlignmentModel, FusionGains, HashedWordBackbone, LatentTriple, TextBackbone, TextLevel};
pub use train::{batch_losses, negative_filter, train_alignment, AlignmentLossWeights, AlignmentLosses};
