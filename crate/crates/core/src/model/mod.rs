//! Decoder-only transformer, LoRA adapters, sampling and checkpoints.

mod checkpoint;
mod config;
mod forward;
mod gradcheck;
mod lora;
mod params;
mod sample;

pub use checkpoint::{
    checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta,
};
pub use config::{count_params, ModelConfig, PRESET_NAMES};
pub use forward::{clm_loss, forward, forward_graph, shifted_targets, Forward, Trainable};
pub use gradcheck::{check_model_gradients, rel_error, GradCheckReport, GroupCheck, REL_FLOOR};
pub use lora::{attach_lora, extend_lora, merge_lora, LoraAdapter, LoraConfig, LoraPair, LoraTarget};
pub use params::{init_model, init_params, is_decayed, tensor_layout, Block, Params, INIT_STD};
pub use sample::{sample, Constraint, Decoder, SamplingConfig};
