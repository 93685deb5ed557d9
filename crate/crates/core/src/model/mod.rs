//! The PatchMLP network and its building blocks.

mod checkpoint;
mod config;
mod decompose;
mod embed;
mod mlp;
mod network;
mod norm;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use config::{balanced_dims, Decomposition, ModelConfig};
pub use decompose::{feature_decompose, feature_decompose_backward, LatentState};
pub use embed::{multi_scale_patch_embed, MultiScaleEmbedding};
pub use mlp::{InterVariableMlp, IntraVariableMlp, MlpBlock};
pub use network::{init_params, Batch, PatchMlp, DROPOUT_STREAM};
pub use norm::{
    denormalize_rows, instance_denormalize, instance_normalize, normalize_rows, NormStats, INSTANCE_NORM_EPS,
};
