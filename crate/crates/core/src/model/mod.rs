//! Compact BERT-style encoder for audio classification.
//!
//! Continuous inputs (`B x L x F` feature matrices) pass through a batch norm
//! that treats each of the L positions as a channel, then a linear mapping to
//! the hidden size H. Token inputs use an embedding table with optional
//! learned positions. Either way a segment bias (row 0 of a 2 x H table) is
//! added before the embedding norm, followed by post-norm encoder layers, a
//! tanh pooler on the first position and a linear classifier.

mod backward;
pub(crate) mod bytes;
mod checkpoint;
mod config;
mod count;
pub(crate) mod forward;
pub(crate) mod ops;
mod params;
mod tensor;

pub use backward::backward;
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub(crate) use checkpoint::{read_config, read_strings, write_config, write_strings};
pub use config::{InputMode, ModelConfig};
pub use count::{count_mult_adds, count_params, mult_add_breakdown, MultAddBreakdown, MultAddConvention};
pub use forward::{forward, forward_train, update_running_stats, ForwardTrace, Input, TrainMode};
pub use params::{init_model, reset_classifier, truncated_normal, Affine, InputParams, LayerParams, Linear, ModelParams, INIT_STD};
pub use tensor::{Real, Tensor};
