//! Small trainable contextual encoder with hand-written gradients.

mod adamw;
mod checkpoint;
mod forward;
mod params;
mod train;

pub use adamw::{adamw_step, AdamWConfig, OptimState};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, read_checkpoint, round_to_storage, write_checkpoint, CHECKPOINT_MAGIC,
};
pub use forward::{backprop_through_encoder, encode};
pub use params::{Attention, EncoderConfig, EncoderGrads, EncoderKind, EncoderParams, Vocab};
pub use train::{
    batch_objective_and_grad, finetune, finetune_with, pair_objective, prepare_pairs, EpochObserver, EpochRecord,
    TrainConfig, TrainHistory, TrainingPair,
};
